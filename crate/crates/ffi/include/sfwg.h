#ifndef SFWG_H
#define SFWG_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SfwgStatus {
  SFWG_STATUS_OK = 0,
  SFWG_STATUS_NULL_POINTER = 1,
  SFWG_STATUS_INVALID_ARGUMENT = 2,
  SFWG_STATUS_MESH = 3,
  SFWG_STATUS_NUMERICAL = 4,
  SFWG_STATUS_NOT_CONVERGED = 5,
  SFWG_STATUS_DIVERGED = 6,
  SFWG_STATUS_IO = 7,
  SFWG_STATUS_BUFFER_TOO_SMALL = 8,
  SFWG_STATUS_PANIC = 9,
} SfwgStatus;

typedef enum SfwgGrid {
  SFWG_GRID_RECT = 0,
  SFWG_GRID_QPH = 1,
} SfwgGrid;

typedef enum SfwgMethod {
  SFWG_METHOD_KACANOV = 0,
  SFWG_METHOD_RICHARDSON = 1,
} SfwgMethod;

typedef enum SfwgKappaInterp {
  SFWG_KAPPA_INTERP_PROJECTED = 0,
  SFWG_KAPPA_INTERP_POINTWISE = 1,
} SfwgKappaInterp;

typedef enum SfwgPenalty {
  SFWG_PENALTY_NONE = 0,
  SFWG_PENALTY_GLOBAL_H = 1,
  SFWG_PENALTY_LOCAL_H = 2,
} SfwgPenalty;

/**
 * Opaque polygonal mesh.
 */
typedef struct SfwgMesh SfwgMesh;

/**
 * Opaque discrete solution together with its space and problem.
 */
typedef struct SfwgSolution SfwgSolution;

/**
 * Solver settings. Obtain defaults from [`sfwg_solve_options_default`].
 */
typedef struct SfwgSolveOptions {
  /**
   * Benchmark problem, 1 or 2.
   */
  uint8_t example;
  /**
   * Polynomial degree of the weak functions, 1 to 6.
   */
  uint32_t k;
  /**
   * Gradient degree; 0 selects `k + 1`.
   */
  uint32_t j;
  enum SfwgMethod method;
  /**
   * Kačanov relaxation in (0, 1].
   */
  double theta;
  /**
   * Richardson step; 0 selects `α/β²`.
   */
  double eps;
  double tol;
  uint32_t max_iter;
  enum SfwgKappaInterp kappa_interp;
  enum SfwgPenalty penalty;
  /**
   * Use preconditioned CG instead of sparse Cholesky.
   */
  bool use_cg;
  bool condense;
} SfwgSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length without
 * the terminator, or 0 if there is none.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t sfwg_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sfwg_version(void);

/**
 * Builds a refinement level of a grid family on the unit square.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum SfwgStatus sfwg_mesh_new(enum SfwgGrid grid, uint32_t level, struct SfwgMesh **out);

/**
 * Builds a mesh from vertex coordinates and counterclockwise polygons.
 * `xy` holds `2 * num_vertices` interleaved coordinates; polygon `c` uses
 * `indices[offsets[c] .. offsets[c + 1]]`, so `offsets` has
 * `num_cells + 1` entries.
 *
 * # Safety
 * All arrays must hold the stated number of elements; `out` must be a
 * valid pointer to a handle slot.
 */
enum SfwgStatus sfwg_mesh_from_polygons(const double *xy,
                                        size_t num_vertices,
                                        const size_t *offsets,
                                        const size_t *indices,
                                        size_t num_cells,
                                        struct SfwgMesh **out);

/**
 * # Safety
 * `mesh` must be null or a handle from this library not yet freed.
 */
void sfwg_mesh_free(struct SfwgMesh *mesh);

/**
 * Number of cells, or 0 for a null handle.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t sfwg_mesh_num_cells(const struct SfwgMesh *mesh);

/**
 * Number of edges, or 0 for a null handle.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t sfwg_mesh_num_edges(const struct SfwgMesh *mesh);

/**
 * Mesh size (largest cell diameter), or NaN for a null handle.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
double sfwg_mesh_h(const struct SfwgMesh *mesh);

struct SfwgSolveOptions sfwg_solve_options_default(void);

/**
 * Solves a benchmark problem on `mesh`. The mesh is copied; the handle
 * stays owned by the caller.
 *
 * # Safety
 * `mesh` must be a live handle, `options` null (defaults) or valid, and
 * `out` a valid pointer to a handle slot.
 */
enum SfwgStatus sfwg_solve(const struct SfwgMesh *mesh,
                           const struct SfwgSolveOptions *options,
                           struct SfwgSolution **out);

/**
 * # Safety
 * `solution` must be null or a handle from this library not yet freed.
 */
void sfwg_solution_free(struct SfwgSolution *solution);

/**
 * L² and energy errors against the benchmark's exact solution.
 *
 * # Safety
 * `solution` must be a live handle; `l2` and `energy` valid pointers.
 */
enum SfwgStatus sfwg_solution_errors(const struct SfwgSolution *solution,
                                     double *l2,
                                     double *energy);

/**
 * Nonlinear iterations used, or 0 for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
size_t sfwg_solution_iterations(const struct SfwgSolution *solution);

/**
 * Length of the full coefficient vector (cell blocks, then edge blocks).
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
size_t sfwg_solution_num_coefficients(const struct SfwgSolution *solution);

/**
 * Copies the coefficient vector into `buf`. Fails with `BufferTooSmall`
 * when `len` is short; `written` receives the required length either way.
 *
 * # Safety
 * `solution` must be a live handle, `buf` point to `len` writable doubles
 * and `written` be a valid pointer.
 */
enum SfwgStatus sfwg_solution_coefficients(const struct SfwgSolution *solution,
                                           double *buf,
                                           size_t len,
                                           size_t *written);

/**
 * Interior polynomial of the solution on `cell` evaluated at `(x, y)`.
 *
 * # Safety
 * `solution` must be a live handle and `value` a valid pointer.
 */
enum SfwgStatus sfwg_solution_eval(const struct SfwgSolution *solution,
                                   size_t cell,
                                   double x,
                                   double y,
                                   double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SFWG_H */
