#include <stdio.h>
#include "hydrorad.h"

int main(void) {
    double offsets[5] = {0.0, 0.0, 0.0, 0.0, 0.0};
    HrSequence *seq = NULL;
    if (hr_simulate(offsets, &seq) != HR_STATUS_OK) {
        char msg[256];
        hr_last_error(msg, sizeof msg);
        fprintf(stderr, "simulate: %s\n", msg);
        return 1;
    }
    size_t points = 0, snapshots = 0;
    double dr = 0.0;
    hr_sequence_dims(seq, &points, &snapshots, &dr);
    double shock[8], edge[8];
    if (hr_extract_features(seq, shock, edge, 8) != HR_STATUS_OK) {
        return 2;
    }
    if (hr_extract_features(seq, shock, edge, 1) != HR_STATUS_BUFFER_TOO_SMALL) {
        return 3;
    }
    printf("%s %zu %zu %.6f %.6f\n", hr_version(), points, snapshots, shock[0], edge[0]);
    hr_sequence_free(seq);
    return 0;
}
