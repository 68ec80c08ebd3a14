#include <stdio.h>
#include "layer_prune.h"

/* layer i is worth i + 1, so the cheapest layers go first */
static int score(void *user_data, const size_t *kept, size_t kept_len, uint64_t seed, double *out) {
    (void)user_data;
    (void)seed;
    double s = 0.0;
    for (size_t i = 0; i < kept_len; i++) s += (double)(kept[i] + 1);
    *out = s;
    return 0;
}

int main(void) {
    size_t buf[8];
    size_t len = 0;
    if (lp_top_layer_prune(12, 3, buf, 8, &len) != LP_STATUS_OK) return 1;
    printf("top:");
    for (size_t i = 0; i < len; i++) printf(" %zu", buf[i]);
    printf("\n");

    LpLedger *ledger = NULL;
    if (lp_glp_search(6, 2, 0, score, NULL, &ledger) != LP_STATUS_OK) {
        fprintf(stderr, "%s\n", lp_last_error());
        return 1;
    }
    if (lp_ledger_lookup(ledger, 2, buf, 8, &len) != LP_STATUS_OK) return 1;
    printf("glp:");
    for (size_t i = 0; i < len; i++) printf(" %zu", buf[i]);
    printf("\n");
    if (lp_ledger_lookup(ledger, 3, buf, 8, &len) != LP_STATUS_OUT_OF_RANGE) return 1;
    lp_ledger_free(ledger);
    printf("ok\n");
    return 0;
}
