/* Classify comments given on the command line with a saved model.
 *
 *   cc classify.c -I../include ../../../target/release/libforumguard_ffi.a \
 *      -lpthread -ldl -lm -o classify
 *   ./classify model.fgm "first comment" "second comment"
 */
#include <stdio.h>
#include <stdlib.h>

#include "forumguard.h"

int main(int argc, char **argv) {
    if (argc < 2) {
        fprintf(stderr, "usage: %s MODEL [TEXT...]\n", argv[0]);
        return 2;
    }
    FgModel *model = NULL;
    if (fg_model_load(argv[1], &model) != FG_STATUS_OK) {
        fprintf(stderr, "load failed: %s\n", fg_last_error_message());
        return 1;
    }
    size_t count = (size_t)(argc - 2);
    FgPrediction *out = calloc(count ? count : 1, sizeof *out);
    FgStatus status = fg_model_predict_batch(model, (const char *const *)(argv + 2), count, out);
    if (status != FG_STATUS_OK) {
        fprintf(stderr, "predict failed (%d): %s\n", (int)status, fg_last_error_message());
        free(out);
        fg_model_free(model);
        return 1;
    }
    for (size_t i = 0; i < count; i++) {
        printf("%u\t%.17g\t%s\n", (unsigned)out[i].label, out[i].score, argv[i + 2]);
    }
    free(out);
    fg_model_free(model);
    return 0;
}
