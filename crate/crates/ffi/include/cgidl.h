#ifndef CGIDL_H
#define CGIDL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Pattern family selector.
 */
typedef enum CgiFamily {
  CGI_FAMILY_WHITE = 0,
  CGI_FAMILY_PINK = 1,
} CgiFamily;

/**
 * Result code of every fallible call.
 */
typedef enum CgiStatus {
  CGI_STATUS_OK = 0,
  CGI_STATUS_NULL_POINTER = 1,
  CGI_STATUS_INVALID_ARGUMENT = 2,
  CGI_STATUS_DIMENSION_MISMATCH = 3,
  CGI_STATUS_IO = 4,
  CGI_STATUS_FORMAT = 5,
  CGI_STATUS_DEGENERATE = 6,
  CGI_STATUS_MISSING_CHECKPOINT = 7,
  CGI_STATUS_PANIC = 8,
  CGI_STATUS_OTHER = 9,
} CgiStatus;

/**
 * Opaque trained network.
 */
typedef struct CgiNetwork CgiNetwork;

/**
 * Opaque reconstructed image.
 */
typedef struct CgiRecon CgiRecon;

/**
 * Opaque binary scene.
 */
typedef struct CgiScene CgiScene;

/**
 * Opaque pattern stack.
 */
typedef struct CgiStack CgiStack;

/**
 * Quality indicators of one image.
 */
typedef struct CgiQuality {
  double psnr;
  double vis;
  double cc;
  double mse;
} CgiQuality;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the last error message on this thread, excluding the
 * terminating NUL.
 */
size_t cgi_last_error_length(void);

/**
 * Copy the last error message into `buf` as a NUL-terminated string,
 * truncating to `cap - 1` bytes. Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t cgi_last_error_message(char *buf, size_t cap);

/**
 * Number of patterns for sampling ratio `beta` on the standard scene grid.
 *
 * # Safety
 * `count` must be a valid pointer.
 */
enum CgiStatus cgi_pattern_count(double beta, size_t *count);

/**
 * Generate a stack of `count` patterns on the standard scene grid.
 *
 * # Safety
 * `stack` must be a valid pointer; on success it receives a new handle.
 */
enum CgiStatus cgi_stack_generate(enum CgiFamily family,
                                  size_t count,
                                  uint64_t seed,
                                  bool binarize,
                                  struct CgiStack **stack);

/**
 * Read a stack container file.
 *
 * # Safety
 * `file` must be a NUL-terminated path and `stack` a valid pointer.
 */
enum CgiStatus cgi_stack_read(const char *file, struct CgiStack **stack);

/**
 * Write a stack container file.
 *
 * # Safety
 * `stack` must be a live handle and `file` a NUL-terminated path.
 */
enum CgiStatus cgi_stack_write(const struct CgiStack *stack, const char *file);

/**
 * Pattern count, height and width of a stack.
 *
 * # Safety
 * `stack` must be a live handle; any of the outputs may be null.
 */
enum CgiStatus cgi_stack_shape(const struct CgiStack *stack,
                               size_t *count,
                               size_t *height,
                               size_t *width);

/**
 * Copy pattern `index` (row-major) into `buf`.
 *
 * # Safety
 * `stack` must be a live handle and `buf` point to `len` writable floats.
 */
enum CgiStatus cgi_stack_pattern(const struct CgiStack *stack,
                                 size_t index,
                                 float *buf,
                                 size_t len);

/**
 * # Safety
 * `stack` must be null or a handle not yet freed.
 */
void cgi_stack_free(struct CgiStack *stack);

/**
 * Scene from a row-major 0/1 transmission map.
 *
 * # Safety
 * `transmission` must point to `height * width` readable bytes and `scene`
 * be a valid pointer.
 */
enum CgiStatus cgi_scene_new(size_t height,
                             size_t width,
                             const uint8_t *transmission,
                             uint8_t label,
                             struct CgiScene **scene);

/**
 * Built-in block-style glyph for digit `digit`.
 *
 * # Safety
 * `scene` must be a valid pointer.
 */
enum CgiStatus cgi_scene_block_digit(uint8_t digit, struct CgiScene **scene);

/**
 * # Safety
 * `scene` must be null or a handle not yet freed.
 */
void cgi_scene_free(struct CgiScene *scene);

/**
 * Measure `scene` with every pattern of `stack` and reconstruct it.
 * A non-finite `snr_db` means noiseless; otherwise uniform noise is drawn
 * from `noise_seed`.
 *
 * # Safety
 * `scene` and `stack` must be live handles and `recon` a valid pointer.
 */
enum CgiStatus cgi_simulate(const struct CgiScene *scene,
                            const struct CgiStack *stack,
                            double snr_db,
                            uint64_t noise_seed,
                            struct CgiRecon **recon);

/**
 * Height, width and sampling ratio of a reconstruction.
 *
 * # Safety
 * `recon` must be a live handle; any of the outputs may be null.
 */
enum CgiStatus cgi_recon_shape(const struct CgiRecon *recon,
                               size_t *height,
                               size_t *width,
                               double *beta);

/**
 * Copy the image values (row-major) into `buf`.
 *
 * # Safety
 * `recon` must be a live handle and `buf` point to `len` writable floats.
 */
enum CgiStatus cgi_recon_values(const struct CgiRecon *recon, float *buf, size_t len);

/**
 * Score a reconstruction against its scene at gray-level depth `bit_depth`.
 *
 * # Safety
 * `recon` and `scene` must be live handles and `quality` a valid pointer.
 */
enum CgiStatus cgi_recon_quality(const struct CgiRecon *recon,
                                 const struct CgiScene *scene,
                                 uint32_t bit_depth,
                                 struct CgiQuality *quality);

/**
 * # Safety
 * `recon` must be null or a handle not yet freed.
 */
void cgi_recon_free(struct CgiRecon *recon);

/**
 * Load a network checkpoint.
 *
 * # Safety
 * `file` must be a NUL-terminated path and `network` a valid pointer.
 */
enum CgiStatus cgi_network_load(const char *file, struct CgiNetwork **network);

/**
 * Enhance a reconstruction with the network.
 *
 * # Safety
 * `network` and `input` must be live handles and `output` a valid pointer.
 */
enum CgiStatus cgi_network_infer(const struct CgiNetwork *network,
                                 const struct CgiRecon *input,
                                 struct CgiRecon **output);

/**
 * # Safety
 * `network` must be null or a handle not yet freed.
 */
void cgi_network_free(struct CgiNetwork *network);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CGIDL_H */
