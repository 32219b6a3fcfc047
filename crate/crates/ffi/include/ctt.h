#ifndef CTT_H
#define CTT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Marker for unassigned events in slot buffers.
#define CTT_UNASSIGNED UINT64_MAX

// Result of every fallible call.
typedef enum CttStatus {
  CTT_STATUS_OK = 0,
  CTT_STATUS_NULL_POINTER = 1,
  CTT_STATUS_INVALID_UTF8 = 2,
  CTT_STATUS_PARSE = 3,
  CTT_STATUS_IO = 4,
  CTT_STATUS_INVALID_ARGUMENT = 5,
  CTT_STATUS_WRONG_TASK = 6,
  CTT_STATUS_PANIC = 99,
} CttStatus;

typedef struct CttInstance CttInstance;

typedef struct CttModel CttModel;

typedef struct CttSolution CttSolution;

// Constraint counts of a timetable.
typedef struct CttReport {
  uint64_t hc1;
  uint64_t hc2;
  uint64_t hc3;
  uint64_t hc4;
  uint64_t hc5;
  uint64_t sc1;
  uint64_t sc2;
  uint64_t sc3;
  uint64_t sc4;
  uint64_t hard_total;
  uint64_t soft_total;
} CttReport;

// GA parameters. `target_fitness < 0` means no target.
typedef struct CttGaConfig {
  uint64_t population_size;
  uint64_t offspring_count;
  double crossover_probability;
  double mutation_probability;
  uint64_t tournament_size;
  uint64_t non_improving_switch;
  uint64_t stop_non_improving;
  uint64_t max_evaluations;
  int64_t target_fitness;
  uint64_t rng_seed;
  uint64_t threads;
} CttGaConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until the
// next call on the same thread.
const char *ctt_last_error(void);

// Library version as a static string.
const char *ctt_version(void);

// Releases a string returned by this library.
void ctt_string_free(char *s);

// Parses instance text in `.ctt` format.
enum CttStatus ctt_instance_parse(const char *text, struct CttInstance **out);

// Reads and parses a `.ctt` file.
enum CttStatus ctt_instance_load(const char *path, struct CttInstance **out);

void ctt_instance_free(struct CttInstance *instance);

// Number of lecture events, 0 for a null handle.
uint64_t ctt_instance_num_events(const struct CttInstance *instance);

// Number of (room, period) pairs, 0 for a null handle.
uint64_t ctt_instance_num_room_period_pairs(const struct CttInstance *instance);

// Evaluates a timetable given as one flat room-period index per event;
// [`CTT_UNASSIGNED`] leaves an event unplaced.
enum CttStatus ctt_evaluate(const struct CttInstance *instance,
                            const uint64_t *slots,
                            size_t len,
                            struct CttReport *out);

// Default GA parameters.
struct CttGaConfig ctt_ga_config_default(void);

// Runs the two-stage GA. When `dataset_path` is non-null every soft-stage
// evaluation is written there (gzip if it ends in `.gz`).
enum CttStatus ctt_solve(const struct CttInstance *instance,
                         const struct CttGaConfig *config,
                         const char *dataset_path,
                         struct CttSolution **out);

void ctt_solution_free(struct CttSolution *solution);

// Soft-stage fitness of the best timetable, `u64::MAX` for a null handle.
uint64_t ctt_solution_fitness(const struct CttSolution *solution);

// 1 when the best timetable has no hard violations, otherwise 0.
int32_t ctt_solution_is_feasible(const struct CttSolution *solution);

// Evaluations spent, 0 for a null handle.
uint64_t ctt_solution_evaluations(const struct CttSolution *solution);

// Copies the flat slot of every event into `buf`, which must hold exactly
// one entry per event.
enum CttStatus ctt_solution_slots(const struct CttSolution *solution, uint64_t *buf, size_t len);

// Solution file text. Free the result with [`ctt_string_free`].
enum CttStatus ctt_solution_text(const struct CttInstance *instance,
                                 const struct CttSolution *solution,
                                 char **out);

// Loads a model saved by the `train` command.
enum CttStatus ctt_model_load(const char *path, struct CttModel **out);

void ctt_model_free(struct CttModel *model);

// 1 for a classifier, 0 for a regressor, -1 for a null handle.
int32_t ctt_model_is_classifier(const struct CttModel *model);

// Predicted fitness of one genome. Regressors only.
enum CttStatus ctt_model_predict_fitness(const struct CttModel *model,
                                         const uint32_t *features,
                                         size_t len,
                                         double *out);

// Writes 1 to `out` when the genome is predicted feasible. Classifiers only.
enum CttStatus ctt_model_predict_feasible(const struct CttModel *model,
                                          const uint32_t *features,
                                          size_t len,
                                          int32_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTT_H */
