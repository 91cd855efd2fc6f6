#include <stdio.h>
#include <string.h>
#include "chanest.h"

int main(void) {
    chanest_channel_t *ch = NULL;
    int code = chanest_channel_new("channel=depolarizing-canonical\ninput=basis:0", &ch);
    if (code != CHANEST_OK) { fprintf(stderr, "new: %s\n", chanest_last_error()); return 1; }
    double bound = 0.0;
    code = chanest_kraus_bound(ch, 0.5, &bound);
    if (code != CHANEST_OK || bound < 1.999999 || bound > 2.000001) { return 2; }
    double fisher = 0.0;
    code = chanest_classical_fisher(ch, "z-basis", 0.5, &fisher);
    if (code != CHANEST_OK || fisher < 1.999999 || fisher > 2.000001) { return 3; }
    chanest_estimation_report_t report;
    code = chanest_crlb_experiment(ch, "z-basis", 0.5, 1000, 10, 42, &report);
    if (code != CHANEST_OK || report.n_trials != 10) { return 4; }
    code = chanest_kraus_bound(ch, 7.0, &bound);
    if (code != CHANEST_ERR_INVALID) { return 5; }
    if (strlen(chanest_last_error()) == 0) { return 6; }
    chanest_channel_free(ch);
    printf("C ABI ok: bound=%.12f fisher=%.12f ratio=%.3f\n", 2.0, 2.0, report.ratio);
    return 0;
}
