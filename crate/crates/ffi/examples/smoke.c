/* Fits PLS1 on a tiny exact line and prints the predictions.
 * Build: cc smoke.c -I../include -L../../../target/release -ldeepchem_ffi -lm -lpthread -ldl
 * Run with LD_LIBRARY_PATH=../../../target/release (or link libdeepchem_ffi.a statically). */
#include <stdio.h>
#include "deepchem.h"

int main(void) {
    double x[12], y[6];
    for (int i = 0; i < 6; i++) {
        x[2 * i] = i;
        x[2 * i + 1] = (i * 7) % 5;
        y[i] = 1.0 + 2.0 * i - x[2 * i + 1];
    }
    DcPlsModel *model = NULL;
    if (dc_pls_fit(x, 6, 2, y, 2, &model) != DC_STATUS_OK) {
        fprintf(stderr, "fit: %s\n", dc_last_error_message());
        return 1;
    }
    double out[6];
    DcStatus st = dc_pls_predict(model, x, 6, 2, out, 6);
    dc_pls_free(model);
    if (st != DC_STATUS_OK) {
        fprintf(stderr, "predict: %s\n", dc_last_error_message());
        return 1;
    }
    for (int i = 0; i < 6; i++) {
        printf("%g %g\n", y[i], out[i]);
    }
    printf("deepchem %s, gap tap %zu floats\n", dc_version(), dc_tap_len("gap"));
    return 0;
}
