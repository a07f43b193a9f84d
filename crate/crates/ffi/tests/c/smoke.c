#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "qsig.h"

static int failures = 0;

static void check(int ok, const char *what) {
  if (!ok) {
    char msg[256];
    qsig_last_error(msg, sizeof msg);
    fprintf(stderr, "FAIL %s (last error: %s)\n", what, msg);
    failures++;
  }
}

static double exact(const QsigState *s, const QsigAttack *a) {
  QsigReport *r = NULL;
  double v = NAN;
  check(qsig_pb_exact(s, a, NULL, 0, &r) == QSIG_STATUS_OK, "pb_exact");
  check(qsig_report_exact(r, &v) == QSIG_STATUS_OK, "report_exact");
  qsig_report_free(r);
  return v;
}

int main(void) {
  const double h = sqrt(0.5);
  const double re[2] = {h, h}, im[2] = {0.0, 0.0};
  const double b[3] = {h, 0.0, h};
  QsigState *plus = NULL, *zero = NULL;
  QsigAttack *breidbart = NULL, *replace = NULL, *probe = NULL;

  check(qsig_state_from_amplitudes(re, im, 2, &plus) == QSIG_STATUS_OK, "plus state");
  check(qsig_state_basis(1, 0, &zero) == QSIG_STATUS_OK, "zero state");
  check(qsig_state_n_qubits(plus) == 1, "n_qubits");
  check(qsig_attack_ir_single(QSIG_SIDE_S, b, b, &breidbart) == QSIG_STATUS_OK, "breidbart");
  check(qsig_attack_replace_random(&replace) == QSIG_STATUS_OK, "replace");
  check(qsig_attack_probe_preset("ancilla_swap_s", &probe) == QSIG_STATUS_OK, "probe");

  check(fabs(exact(plus, breidbart) - 0.75) < 1e-12, "breidbart 3/4");
  check(fabs(exact(plus, replace) - 0.5) < 1e-12, "replacement 1/2");
  check(fabs(exact(zero, probe) - 13.0 / 16.0) < 1e-12, "probe 13/16");

  bool delivered = false;
  double fidelity = 0.0;
  check(qsig_roundtrip(plus, 7, &delivered, &fidelity) == QSIG_STATUS_OK, "roundtrip");
  check(delivered && fabs(fidelity - 1.0) < 1e-10, "roundtrip delivered");

  QsigReport *r = NULL;
  char *json = NULL;
  check(qsig_pb_exact(plus, breidbart, NULL, 0, &r) == QSIG_STATUS_OK, "report");
  check(qsig_report_to_json(r, &json) == QSIG_STATUS_OK, "to_json");
  check(json != NULL && strstr(json, "\"exact\"") != NULL, "json body");
  qsig_string_free(json);
  qsig_report_free(r);

  const double bad[2] = {1.0, 1.0};
  QsigState *broken = NULL;
  check(qsig_state_from_amplitudes(bad, im, 2, &broken) == QSIG_STATUS_INVALID_STATE, "unnormalized rejected");
  check(broken == NULL, "no handle on failure");
  check(qsig_last_error(NULL, 0) > 1, "error message set");

  qsig_attack_free(breidbart);
  qsig_attack_free(replace);
  qsig_attack_free(probe);
  qsig_state_free(plus);
  qsig_state_free(zero);
  printf("qsig %s: %d failures\n", qsig_version(), failures);
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
