#include <stdio.h>
#include "pinnbasis.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        PbStatus s_ = (call);                                              \
        if (s_ != PB_STATUS_OK) {                                          \
            fprintf(stderr, "%s -> %d: %s\n", #call, s_, pb_last_error()); \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    size_t dims[] = {1, 8, 8, 1};
    PbNetwork *net = NULL;
    PbBasis *basis = NULL;
    double loss = 0.0;
    CHECK(pb_network_new(dims, 4, 7, &net));
    CHECK(pb_network_train(net, "poisson_1d", 20, 1e-3, 64, 0, 7, &loss));

    PbDomain domain = {PB_DOMAIN_KIND_INTERVAL, -1.0, 1.0, 0.0, 0.0};
    CHECK(pb_basis_build(net, domain, 40, &basis));
    size_t r = pb_basis_r_max(basis) - 1;

    double coeffs[16];
    PbNorms err, res;
    CHECK(pb_poisson_solve(basis, "poisson_1d", r, 200.0, 80, coeffs, &err, &res));
    if (pb_poisson_solve(basis, "nope", r, 200.0, 80, coeffs, NULL, NULL) != PB_STATUS_UNKNOWN_PROBLEM) {
        return 2;
    }
    printf("r=%zu err=%.3e res=%.3e version=%s\n", r, err.l2, res.l2, pb_version());
    pb_basis_free(basis);
    pb_network_free(net);
    return 0;
}
