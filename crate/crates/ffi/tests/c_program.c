#include <stdio.h>
#include <string.h>
#include "choi_bench.h"

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            fprintf(stderr, "check failed: %s (%s)\n", #cond,         \
                    cb_last_error_message());                         \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(void) {
    /* CNOT on two qubits, control first */
    double u[2 * 16];
    memset(u, 0, sizeof u);
    u[2 * 0] = 1.0;
    u[2 * 5] = 1.0;
    u[2 * 11] = 1.0;
    u[2 * 14] = 1.0;

    CbChannel *ch = NULL;
    CHECK(cb_channel_from_unitary(u, 4, &ch) == CB_STATUS_OK);
    size_t n = 0;
    CHECK(cb_channel_num_qubits(ch, &n) == CB_STATUS_OK && n == 2);

    CbChannel *red = NULL;
    CHECK(cb_channel_reduce(ch, 2u, &red) == CB_STATUS_OK);
    double dev = 1.0;
    CHECK(cb_channel_stochasticity_deviation(red, &dev) == CB_STATUS_OK && dev < 1e-9);

    CbTomoResult *res = NULL;
    CHECK(cb_tomography_run(ch, 2u, 1, 200, 30, 7, &res) == CB_STATUS_OK);
    double means[3], ses[3];
    CHECK(cb_tomo_result_errors(res, means, ses) == CB_STATUS_OK);
    CHECK(means[2] > 0.0 && ses[2] > 0.0);

    CHECK(cb_channel_from_unitary(u, 3, &red) == CB_STATUS_INVALID_ARGUMENT);
    CHECK(strlen(cb_last_error_message()) > 0);

    printf("%.6e %.6e %.6e\n", means[0], means[1], means[2]);
    cb_tomo_result_free(res);
    cb_channel_free(red);
    cb_channel_free(ch);
    return 0;
}
