/* Drives the C API end to end: argv[1] config, argv[2] output directory. */
#include <math.h>
#include <stdio.h>
#include <string.h>

#include "goldiprox.h"

#define CHECK(call)                                                          \
  do {                                                                       \
    GpxStatus s_ = (call);                                                   \
    if (s_ != GPX_STATUS_OK) {                                               \
      const char *m_ = gpx_last_error();                                     \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, m_ ? m_ : "(none)"); \
      return 1;                                                              \
    }                                                                        \
  } while (0)

int main(int argc, char **argv) {
  if (argc != 3) return 2;
  char seq_path[4096];
  snprintf(seq_path, sizeof seq_path, "%s/sequence.gpsq", argv[2]);

  GpxConfig *cfg = NULL;
  CHECK(gpx_config_load(argv[1], &cfg));
  CHECK(gpx_config_set_seed(cfg, 3));

  GpxRun *run = NULL;
  CHECK(gpx_run(cfg, argv[2], &run));
  size_t rows = 0;
  CHECK(gpx_run_num_rows(run, &rows));
  GpxMetricsRow last;
  CHECK(gpx_run_row(run, rows - 1, &last));
  if (!(last.test_accuracy >= 0.0 && last.test_accuracy <= 1.0)) return 1;
  if (gpx_run_row(run, rows, &last) != GPX_STATUS_OUT_OF_RANGE) return 1;
  uint64_t recorded = 0;
  CHECK(gpx_run_fingerprint(run, &recorded));

  GpxSequence *seq = NULL;
  CHECK(gpx_sequence_read(seq_path, &seq));
  GpxSequenceHeader h;
  CHECK(gpx_sequence_header(seq, &h));
  if (h.seed != 3 || h.kind != 3 || h.num_batches != last.step) return 1;
  uint32_t ids[64];
  size_t len = 0;
  CHECK(gpx_sequence_batch(seq, 0, ids, 64, &len));
  if (len != h.batch_size) return 1;
  gpx_sequence_free(seq);

  /* Replaying with the recording config reproduces the weights exactly. */
  GpxRun *rep = NULL;
  CHECK(gpx_replay(cfg, seq_path, argv[2], &rep));
  uint64_t replayed = 0;
  CHECK(gpx_run_fingerprint(rep, &replayed));
  if (replayed != recorded) return 1;
  GpxMetricsRow rrow;
  CHECK(gpx_run_row(rep, 0, &rrow));
  if (!isnan(rrow.mean_score)) return 1;

  unsigned char junk[40] = {0};
  GpxSequence *bad = NULL;
  if (gpx_sequence_decode(junk, sizeof junk, &bad) != GPX_STATUS_SEQUENCE || bad) return 1;
  if (gpx_last_error() == NULL) return 1;

  gpx_run_free(rep);
  gpx_run_free(run);
  gpx_config_free(cfg);
  printf("ok %s\n", gpx_version());
  return 0;
}
