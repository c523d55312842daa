#include <math.h>
#include <stdio.h>

#include "grinpol.h"

#define CHECK(expr)                                                        \
  do {                                                                     \
    GpStatus s_ = (expr);                                                  \
    if (s_ != GP_STATUS_OK) {                                              \
      fprintf(stderr, "%s -> %d: %s\n", #expr, (int)s_, gp_last_error()); \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(void) {
  double f = 0.0, w = 0.0, z = 0.0, t = 0.0, fid = 0.0;
  CHECK(gp_focal_length(1.0 / (312.0 * 0.002), 312.0, &f));
  CHECK(gp_coupled_waist(728e-9, 2.5e-6, f, &w));
  CHECK(gp_confocal_parameter(w, 728e-9, &z));
  if (fabs(f - 2e-3) > 1e-12 || fabs(w - 185.38e-6) > 0.01e-6 || fabs(z - 0.1483) > 1e-3) {
    fprintf(stderr, "beam values off: %g %g %g\n", f, w, z);
    return 1;
  }

  GpDensityMatrix *bell = NULL, *est = NULL;
  GpCountSet *counts = NULL;
  size_t iterations = 0;
  CHECK(gp_density_bell(GP_BELL_PSI_MINUS, &bell));
  CHECK(gp_counts_simulate(bell, 1e6, 7, &counts));
  if (gp_counts_len(counts) != 16) return 1;
  CHECK(gp_mle_reconstruct(counts, 0, 0.0, &est, &iterations));
  CHECK(gp_fidelity_bell(est, GP_BELL_PSI_MINUS, &fid));
  CHECK(gp_tangle(est, &t));
  if (fid < 0.999 || t < 0.996) {
    fprintf(stderr, "reconstruction off: F=%g tau=%g\n", fid, t);
    return 1;
  }

  if (gp_tangle(NULL, &t) != GP_STATUS_NULL_POINTER) return 1;

  gp_density_free(est);
  gp_density_free(bell);
  gp_counts_free(counts);
  printf("ok %s F=%.6f tau=%.6f iterations=%zu\n", gp_version(), fid, t, iterations);
  return 0;
}
