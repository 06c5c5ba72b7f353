/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef SURFHPS_H
#define SURFHPS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SurfhpsStatus {
  SURFHPS_STATUS_OK = 0,
  // Null pointer, wrong buffer length or malformed string.
  SURFHPS_STATUS_INVALID_ARGUMENT = 1,
  // Mesh, file or configuration problem.
  SURFHPS_STATUS_INPUT_ERROR = 2,
  // Singular operator, divergence or other numerical failure.
  SURFHPS_STATUS_NUMERICAL_ERROR = 3,
  // Internal panic caught at the boundary.
  SURFHPS_STATUS_PANIC = 4,
} SurfhpsStatus;

// Factored operator handle; owns a copy of its mesh.
typedef struct SurfhpsFactorization SurfhpsFactorization;

// Surface mesh handle.
typedef struct SurfhpsMesh SurfhpsMesh;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next surfhps call on the same thread.
const char *surfhps_last_error(void);

// Library version as a static NUL-terminated string.
const char *surfhps_version(void);

// Builds a mesh from a generator family (`sphere`, `cube`, `blob`,
// `torus`, `deformed-torus`, `twisted-torus`).
//
// # Safety
// `family` must be a NUL-terminated string and `out` a valid pointer.
enum SurfhpsStatus surfhps_mesh_generate(const char *family,
                                         size_t refine,
                                         size_t order,
                                         struct SurfhpsMesh **out);

// Reads a mesh file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum SurfhpsStatus surfhps_mesh_load(const char *path, struct SurfhpsMesh **out);

// # Safety
// `mesh` must come from a surfhps constructor and not be used afterwards.
void surfhps_mesh_free(struct SurfhpsMesh *mesh);

// Element count, nodes per element and closedness (1 for closed).
//
// # Safety
// `mesh` must be a valid handle; output pointers may be null.
enum SurfhpsStatus surfhps_mesh_info(const struct SurfhpsMesh *mesh,
                                     size_t *elements,
                                     size_t *nodes_per_element,
                                     int32_t *closed);

// Writes node coordinates as `x y z` triples, element by element;
// `len` must be three times the node count.
//
// # Safety
// `mesh` must be a valid handle and `xyz` point to `len` doubles.
enum SurfhpsStatus surfhps_mesh_nodes(const struct SurfhpsMesh *mesh, double *xyz, size_t len);

// Factors `Δ_Γ + shift`; `shift = 0` gives the Laplace–Beltrami operator.
//
// # Safety
// `mesh` must be a valid handle and `out` a valid pointer.
enum SurfhpsStatus surfhps_factor_helmholtz(const struct SurfhpsMesh *mesh,
                                            double shift,
                                            struct SurfhpsFactorization **out);

// # Safety
// `fact` must come from a surfhps constructor and not be used afterwards.
void surfhps_factorization_free(struct SurfhpsFactorization *fact);

// Number of Dirichlet boundary nodes; zero on closed surfaces.
//
// # Safety
// `fact` must be a valid handle and `out` a valid pointer.
enum SurfhpsStatus surfhps_factorization_boundary_count(const struct SurfhpsFactorization *fact,
                                                        size_t *out);

// Dirichlet node coordinates as `x y z` triples; `len` is three times the
// boundary count.
//
// # Safety
// `fact` must be a valid handle and `xyz` point to `len` doubles.
enum SurfhpsStatus surfhps_factorization_boundary_points(const struct SurfhpsFactorization *fact,
                                                         double *xyz,
                                                         size_t len);

// Solves with load `f` at every node (mesh node order) and Dirichlet data
// `g` at the boundary points, writing nodal values to `u`. For the closed
// Laplace–Beltrami operator the load's mean is removed and the returned
// solution has zero mean.
//
// # Safety
// `fact` must be a valid handle; `f`, `u` hold one double per mesh node
// and `g` one per boundary point (`g` may be null when that count is 0).
enum SurfhpsStatus surfhps_solve(struct SurfhpsFactorization *fact,
                                 const double *f,
                                 size_t f_len,
                                 const double *g,
                                 size_t g_len,
                                 double *u,
                                 size_t u_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SURFHPS_H */
