#include <stdio.h>
#include <string.h>

#include "ctt.h"

static const char *TOY =
    "Name: Toy\nCourses: 3\nRooms: 2\nDays: 2\nPeriods_per_day: 2\nCurricula: 1\nConstraints: 0\n\n"
    "COURSES:\nC1 t1 2 2 30\nC2 t2 1 1 10\nC3 t1 1 1 20\n\n"
    "ROOMS:\nR1 40\nR2 20\n\n"
    "CURRICULA:\nQ1 2 C1 C2\n\n"
    "UNAVAILABILITY_CONSTRAINTS:\n\nEND.\n";

int main(void) {
    CttInstance *instance = NULL;
    if (ctt_instance_parse(TOY, &instance) != CTT_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", ctt_last_error());
        return 1;
    }
    CttGaConfig config = ctt_ga_config_default();
    config.rng_seed = 7;
    config.max_evaluations = 1000;
    CttSolution *solution = NULL;
    if (ctt_solve(instance, &config, NULL, &solution) != CTT_STATUS_OK) {
        fprintf(stderr, "solve: %s\n", ctt_last_error());
        return 1;
    }
    uint64_t slots[4];
    CttReport report;
    if (ctt_solution_slots(solution, slots, 4) != CTT_STATUS_OK ||
        ctt_evaluate(instance, slots, 4, &report) != CTT_STATUS_OK) {
        fprintf(stderr, "%s\n", ctt_last_error());
        return 1;
    }
    if (ctt_instance_parse("garbage", &(CttInstance *){NULL}) != CTT_STATUS_PARSE ||
        strncmp(ctt_last_error(), "line", 4) != 0) {
        return 1;
    }
    printf("events=%llu feasible=%d hard=%llu soft=%llu\n",
           (unsigned long long)ctt_instance_num_events(instance), ctt_solution_is_feasible(solution),
           (unsigned long long)report.hard_total, (unsigned long long)report.soft_total);
    ctt_solution_free(solution);
    ctt_instance_free(instance);
    return 0;
}
