#include <stdio.h>
#include "bitflip.h"

int main(void) {
    BitflipPipeline *p = NULL;
    if (bitflip_pipeline_new(0, BITFLIP_VARIANT_STANDARD, &p) != BITFLIP_STATUS_OK) {
        fprintf(stderr, "new: %s\n", bitflip_last_error());
        return 1;
    }
    BitflipContext ctx = {{0}, 0, 0, 0};
    BitflipMessage msg = {300.0f, 25.0f, 2.0f};
    uint8_t wire[64];
    size_t len = 0;
    if (bitflip_pipeline_protect(p, &ctx, &msg, wire, sizeof wire, &len) != BITFLIP_STATUS_OK) {
        fprintf(stderr, "protect: %s\n", bitflip_last_error());
        return 1;
    }
    size_t flips[2] = {56, 136};
    bitflip_apply_flips(p, wire, len, flips, 2);
    BitflipReception r;
    bitflip_pipeline_receive(p, &ctx, wire, len, &msg, &r);
    printf("%d %g %u\n", (int)r.verdict, r.received.acceleration, r.mutated_fields);
    bitflip_pipeline_free(p);
    return r.verdict == BITFLIP_VERDICT_ACCEPTED_MUTATED && r.received.acceleration == 4.0f ? 0 : 1;
}
