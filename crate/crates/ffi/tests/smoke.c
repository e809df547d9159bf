#include <math.h>
#include <stdio.h>
#include "slah.h"

int main(void) {
    double row[3] = {10.0, 0.0, 4.0};
    double w[3];
    if (slah_weights(row, 3, w) != SLAH_STATUS_OK) return 1;
    if (fabs(w[0] + w[1] + w[2] - 1.0) > 1e-12) return 2;

    SlahSimulator *sim = NULL;
    if (slah_simulator_new("[scenario]\nrings = 1\n", &sim) != SLAH_STATUS_OK) return 3;
    size_t n = slah_simulator_num_enbs(sim);
    if (n != 7) return 4;
    double alphas[7], bcr[7], ftt[7];
    for (size_t i = 0; i < n; i++) alphas[i] = 0.5;
    if (slah_simulator_run_episode(sim, alphas, n, 200, 20, 1, bcr, ftt) != SLAH_STATUS_OK) return 5;
    slah_simulator_free(sim);

    char msg[128];
    if (slah_simulator_new("bogus = 1\n", &sim) != SLAH_STATUS_CONFIG) return 6;
    slah_last_error(msg, sizeof msg);
    printf("%s\n", msg);
    return 0;
}
