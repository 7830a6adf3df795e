#include <stdio.h>
#include <string.h>
#include "mokka.h"

int main(void) {
    MokkaKeyring *keys = NULL;
    if (mokka_keyring_generate("mokka", 3, &keys) != MOKKA_STATUS_OK) return 10;
    if (mokka_keyring_quorum(keys) != 2) return 11;

    MokkaReport *report = NULL;
    if (mokka_simulate("happy-path-n3", &report) != MOKKA_STATUS_OK) return 12;
    if (mokka_report_violations(report) != 0) return 13;
    if (strstr(mokka_report_machine(report), "result\tok") == NULL) return 14;
    uint16_t leader = 0xffff;
    if (mokka_report_final_leader(report, &leader) != MOKKA_STATUS_OK || leader > 2) return 15;

    uint8_t junk[3] = {1, 2, 3};
    MokkaValidation verdict;
    if (mokka_proof_validate(keys, junk, sizeof junk, 0, 15000, 0, &verdict) != MOKKA_STATUS_PARSE) return 16;
    if (mokka_last_error() == NULL) return 17;

    mokka_report_free(report);
    mokka_keyring_free(keys);
    printf("ok %s\n", mokka_version());
    return 0;
}
