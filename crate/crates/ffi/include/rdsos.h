#ifndef RDSOS_H
#define RDSOS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RdsosStatus {
  RDSOS_STATUS_OK = 0,
  RDSOS_STATUS_NULL_POINTER = 1,
  RDSOS_STATUS_INVALID_ARGUMENT = 2,
  RDSOS_STATUS_PARSE = 3,
  RDSOS_STATUS_IO = 4,
  RDSOS_STATUS_NUMERICAL = 5,
  RDSOS_STATUS_PANIC = 6,
} RdsosStatus;

typedef enum RdsosExample {
  RDSOS_EXAMPLE_MLSBM = 0,
  RDSOS_EXAMPLE_MLDCSBM = 1,
} RdsosExample;

/**
 * Opaque multi-layer network.
 */
typedef struct RdsosNetwork RdsosNetwork;

/**
 * Opaque community assignment.
 */
typedef struct RdsosPartition RdsosPartition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into this library from the same thread.
 */
const char *rdsos_last_error_message(void);

/**
 * Loads a `layer <sep> src <sep> dst` edge list with string node names.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out_network` a valid pointer.
 */
enum RdsosStatus rdsos_network_load(const char *path,
                                    char separator,
                                    struct RdsosNetwork **out_network);

/**
 * Builds a network from `m` zero-based edge records `(layer[e], src[e], dst[e])`
 * over `n` nodes and `layers` layers.
 *
 * # Safety
 * The three arrays must each hold `m` elements.
 */
enum RdsosStatus rdsos_network_from_edges(size_t n,
                                          size_t layers,
                                          const size_t *layer,
                                          const size_t *src,
                                          const size_t *dst,
                                          size_t m,
                                          struct RdsosNetwork **out_network);

/**
 * Samples the built-in 20-node, 3-layer example model.
 *
 * # Safety
 * Both out pointers must be valid; `out_truth` may be null.
 */
enum RdsosStatus rdsos_generate_example(enum RdsosExample model,
                                        uint64_t seed,
                                        struct RdsosNetwork **out_network,
                                        struct RdsosPartition **out_truth);

/**
 * # Safety
 * `network` must be null or a handle from this library.
 */
size_t rdsos_network_node_count(const struct RdsosNetwork *network);

/**
 * # Safety
 * `network` must be null or a handle from this library.
 */
size_t rdsos_network_layer_count(const struct RdsosNetwork *network);

/**
 * # Safety
 * `network` must be null or an unfreed handle from this library.
 */
void rdsos_network_free(struct RdsosNetwork *network);

/**
 * Splits the network into `k` communities. `method` is a method name such
 * as `"rdsos"` or `"DC-RDSoS"`. A negative or NaN `tau` selects the
 * default regularizer; `restarts == 0` selects the default restart count.
 *
 * # Safety
 * `network` must be a live handle, `method` NUL-terminated and
 * `out_partition` valid.
 */
enum RdsosStatus rdsos_detect(const struct RdsosNetwork *network,
                              size_t k,
                              const char *method,
                              double tau,
                              uint64_t seed,
                              size_t restarts,
                              struct RdsosPartition **out_partition);

/**
 * Scans k = 1..=kmax and writes the modularity-maximizing k. `metric` is
 * `"sos"` or `"mnavrg"`.
 *
 * # Safety
 * `network` must be a live handle, strings NUL-terminated, `out_k` valid;
 * `out_q` may be null.
 */
enum RdsosStatus rdsos_estimate_k(const struct RdsosNetwork *network,
                                  const char *method,
                                  const char *metric,
                                  size_t kmax,
                                  double tau,
                                  uint64_t seed,
                                  size_t restarts,
                                  size_t *out_k,
                                  double *out_q);

/**
 * Builds a partition from `n` zero-based labels; K is the largest label plus one.
 *
 * # Safety
 * `labels` must hold `n` elements.
 */
enum RdsosStatus rdsos_partition_from_labels(const size_t *labels,
                                             size_t n,
                                             struct RdsosPartition **out_partition);

/**
 * # Safety
 * `partition` must be null or a handle from this library.
 */
size_t rdsos_partition_len(const struct RdsosPartition *partition);

/**
 * # Safety
 * `partition` must be null or a handle from this library.
 */
size_t rdsos_partition_k(const struct RdsosPartition *partition);

/**
 * Copies the zero-based labels into `buf`, which must hold at least
 * `rdsos_partition_len` elements.
 *
 * # Safety
 * `buf` must be writable for `capacity` elements.
 */
enum RdsosStatus rdsos_partition_labels(const struct RdsosPartition *partition,
                                        size_t *buf,
                                        size_t capacity);

/**
 * Clustering error of `estimate` against `truth`.
 *
 * # Safety
 * Both handles must be live and `out_error` valid.
 */
enum RdsosStatus rdsos_clustering_error(const struct RdsosPartition *truth,
                                        const struct RdsosPartition *estimate,
                                        double *out_error);

/**
 * # Safety
 * `partition` must be null or an unfreed handle from this library.
 */
void rdsos_partition_free(struct RdsosPartition *partition);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RDSOS_H */
