/* Build: cargo build -p bellsim-ffi
 *        cc crates/ffi/examples/saturate.c -Icrates/ffi/include -Ltarget/debug -lbellsim_ffi -o saturate
 * Run:   LD_LIBRARY_PATH=target/debug ./saturate
 */
#include <math.h>
#include <stdio.h>

#include "bellsim.h"

int main(void) {
    const double pi = 3.14159265358979323846;
    const double l = 3.0 * (3.0 - 2.0 * sqrt(2.0));
    BellsimExperiment *exp = NULL;
    BellsimStatus st = bellsim_experiment_new(BELLSIM_MODEL_KIND_OCTANT, l, 0.0, pi / 2, pi / 4, -pi / 4,
                                              1.5, 100000, 42, 0, &exp);
    if (st != BELLSIM_STATUS_OK) {
        fprintf(stderr, "error: %s\n", bellsim_last_error());
        return 1;
    }

    double s, gamma, delta;
    BellsimBounds bounds;
    bellsim_exact_chsh(exp, &s, &gamma, &delta);
    bellsim_bounds(gamma, &bounds);
    printf("exact  gamma=%.6f S=%.6f bound=%.6f\n", gamma, s, bounds.s_bound);

    BellsimChshResult *res = NULL;
    if (bellsim_experiment_run(exp, 0, &res) == BELLSIM_STATUS_OK) {
        double s_mc, se;
        bellsim_chsh_s_value(res, &s_mc);
        bellsim_chsh_s_std_error(res, &se);
        printf("mc     S=%.4f +/- %.4f\n", s_mc, se);
        bellsim_chsh_result_free(res);
    }

    bellsim_experiment_free(exp);
    return 0;
}
