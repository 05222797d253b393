/* Copyright (C) 2026 The incontext Authors
 * SPDX-License-Identifier: Apache-2.0 */

/* C interface to the incontext library.
 *
 * Every object is an opaque handle released with its matching *_free
 * function (NULL is accepted). Functions return IC_OK or an error code; the
 * message of the most recent failure on the calling thread is available from
 * ic_last_error(). Strings returned through char** out-parameters are heap
 * allocated and must be released with ic_string_free().
 *
 * Configuration objects are passed as JSON text. Unknown keys are rejected and
 * missing keys take their defaults; ic_default_config() returns the full
 * default object of each section. */

#ifndef INCONTEXT_INCONTEXT_H
#define INCONTEXT_INCONTEXT_H

#include <stddef.h>

#if defined(_WIN32)
#define IC_API __declspec(dllexport)
#else
#define IC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ic_status {
    IC_OK = 0,
    IC_ERR_INVALID_ARGUMENT = 1,
    IC_ERR_SHAPE = 2,
    IC_ERR_RANGE = 3,
    IC_ERR_IO = 4,
    IC_ERR_FORMAT = 5,
    IC_ERR_DIGEST = 6,
    IC_ERR_VERSION = 7,
    IC_ERR_NUMERIC = 8,
    IC_ERR_PRECONDITION = 9,
    IC_ERR_EMPTY_MASK = 10,
    IC_ERR_NULL_ARGUMENT = 20,
    IC_ERR_BAD_HANDLE = 21,
    IC_ERR_UNSUPPORTED = 22,
    IC_ERR_INTERNAL = 99
} ic_status;

typedef struct ic_backend ic_backend;
typedef struct ic_image ic_image;
typedef struct ic_mask ic_mask;
typedef struct ic_checkpoint ic_checkpoint;
typedef struct ic_region ic_region;

IC_API const char* ic_version(void);
IC_API const char* ic_status_name(ic_status status);
/* Message of the last failed call on this thread, "" if none. */
IC_API const char* ic_last_error(void);
IC_API void ic_string_free(char* s);

/* section: "backend", "train", "edit", "generate", "region" or "extract". */
IC_API ic_status ic_default_config(const char* section, char** json_out);
/* Hex SHA-256 of a file's bytes. */
IC_API ic_status ic_file_digest(const char* path, char** hex_out);
/* Substitutes {OBJECT} and renames the [v*] slot to [token_name]. */
IC_API ic_status ic_build_prompt(const char* prompt_template, const char* object_class, const char* token_name,
                                 char** prompt_out);
/* The seed-splitting rule used for every subsystem seed. */
IC_API unsigned long long ic_derive_seed(unsigned long long master, const char* tag);

/* Backends. The "backend" section selects kind "toy" (built from its seed and
 * geometry, or loaded from params_bin/params_json when both are set) or
 * "external", which this build reports as IC_ERR_UNSUPPORTED. */
IC_API ic_status ic_backend_create(const char* backend_json, ic_backend** out);
IC_API ic_status ic_backend_save_params(const ic_backend* backend, const char* bin_path, const char* json_path);
IC_API ic_status ic_backend_descriptor(const ic_backend* backend, char** json_out);
IC_API ic_status ic_backend_digest(const ic_backend* backend, char** hex_out);
IC_API void ic_backend_free(ic_backend* backend);

/* RGB images, values in [0,1], planar [3,H,W] row-major. */
IC_API ic_status ic_image_load(const char* path, ic_image** out);
IC_API ic_status ic_image_save(const ic_image* image, const char* path);
IC_API ic_status ic_image_create(size_t height, size_t width, const double* chw, ic_image** out);
IC_API ic_status ic_image_shape(const ic_image* image, size_t* height, size_t* width);
IC_API ic_status ic_image_copy_data(const ic_image* image, double* out, size_t count);
IC_API void ic_image_free(ic_image* image);

/* Binary masks at image resolution, one byte per pixel (0 or 1). */
IC_API ic_status ic_mask_load(const char* path, ic_mask** out);
IC_API ic_status ic_mask_save(const ic_mask* mask, const char* path);
IC_API ic_status ic_mask_create(size_t height, size_t width, const unsigned char* values, ic_mask** out);
IC_API ic_status ic_mask_shape(const ic_mask* mask, size_t* height, size_t* width);
IC_API ic_status ic_mask_copy_data(const ic_mask* mask, unsigned char* out, size_t count);
IC_API ic_status ic_mask_iou(const ic_mask* a, const ic_mask* b, double* out);
IC_API void ic_mask_free(ic_mask* mask);

/* Concept learning. The returned checkpoint also carries the loss trace. */
IC_API ic_status ic_learn(const ic_backend* base, const ic_image* image, const ic_mask* mask, const char* object_class,
                          const char* train_json, ic_checkpoint** out);
IC_API ic_status ic_checkpoint_save(const ic_checkpoint* ckpt, const char* path);
IC_API ic_status ic_checkpoint_load(const char* path, ic_checkpoint** out);
/* Token name, training config, backend descriptor and digests as JSON. */
IC_API ic_status ic_checkpoint_info(const ic_checkpoint* ckpt, char** json_out);
/* CSV loss trace; IC_ERR_PRECONDITION for checkpoints read from disk. */
IC_API ic_status ic_checkpoint_write_trace(const ic_checkpoint* ckpt, const char* csv_path);
/* Base backend plus the checkpoint's cross-attention deltas. */
IC_API ic_status ic_checkpoint_apply(const ic_backend* base, const ic_checkpoint* ckpt, ic_backend** tuned_out);
IC_API void ic_checkpoint_free(ic_checkpoint* ckpt);

/* Concept transfer into the masked region of `image`. `tuned` is the
 * checkpoint applied to its base. trace_json_out may be NULL. */
IC_API ic_status ic_edit(const ic_backend* tuned, const ic_checkpoint* ckpt, const ic_image* image, const ic_mask* mask,
                         const char* prompt, const char* edit_json, ic_image** out, char** trace_json_out);
/* Two-stage generation: base model for the first t_s steps, tuned after. */
IC_API ic_status ic_generate(const ic_backend* base, const ic_backend* tuned, const ic_checkpoint* ckpt,
                             const char* generate_json, ic_image** out);

/* RoI matching. A target matcher is trained on the concept-tuned backend from
 * the checkpoint's token; a common concept token is trained on a base backend
 * from at least two images and carries its own cross-attention deltas, which
 * ic_extract_mask applies on top of the backend it is given. */
IC_API ic_status ic_learn_target_matcher(const ic_backend* tuned, const ic_checkpoint* ckpt, const ic_image* source,
                                         const ic_mask* source_mask, const char* object_class, const char* region_json,
                                         ic_region** out);
IC_API ic_status ic_learn_common_concept(const ic_backend* base, const ic_image* const* images, size_t count,
                                         const char* object_class, const char* region_json, ic_region** out);
/* Per-step training losses as a JSON array. */
IC_API ic_status ic_region_trace(const ic_region* region, char** json_out);
/* info_json_out (may be NULL) receives confidence and probe settings. */
IC_API ic_status ic_extract_mask(const ic_backend* backend, const ic_region* region, const ic_image* image,
                                 const char* extract_json, ic_mask** out, char** info_json_out);
IC_API void ic_region_free(ic_region* region);

#ifdef __cplusplus
}
#endif

#endif
