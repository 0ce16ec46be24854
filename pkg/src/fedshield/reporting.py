"""CSV report emission with schema-stable headers.

Floats are written with repr (shortest round-trip form) so reruns under
the same seed produce byte-identical files; only the wall-clock timing
columns vary between runs.
"""

import math

ROUND_CSV_HEADER = (
    "round,acc,m_enc_pct,m_pers_pct,m_noise_pct,"
    "t_train_s,t_encrypt_s,t_aggregate_s,t_decrypt_s,eps_dp,alpha_star"
)
SWEEP_CSV_HEADER = ROUND_CSV_HEADER + ",tau,rho"
ATTACK_CSV_HEADER = "round,client,le_acc,ln_acc,idlg_mse,visible_fraction"
PRIVACY_CSV_HEADER = "T,alpha_star,eps_rdp,eps_dp,delta"

TIMING_COLUMNS = ("t_train_s", "t_encrypt_s", "t_aggregate_s", "t_decrypt_s")


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def _round_row(report) -> list:
    enc, pers, noise = report.zone_ratios
    return [
        report.round,
        report.accuracy,
        enc * 100.0,
        pers * 100.0,
        noise * 100.0,
        report.timings["train"],
        report.timings["encrypt"],
        report.timings["aggregate"],
        report.timings["decrypt"],
        report.eps_dp,
        report.alpha_star,
    ]


def write_round_csv(reports, path):
    with open(path, "w") as fh:
        fh.write(ROUND_CSV_HEADER + "\n")
        for report in reports:
            fh.write(",".join(_fmt(v) for v in _round_row(report)) + "\n")


def write_sweep_csv(cells, path):
    """cells: iterable of (tau, rho, final RoundReport)."""
    with open(path, "w") as fh:
        fh.write(SWEEP_CSV_HEADER + "\n")
        for tau, rho, report in cells:
            row = _round_row(report) + [tau, rho]
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_privacy_csv(reports, path):
    with open(path, "w") as fh:
        fh.write(PRIVACY_CSV_HEADER + "\n")
        for report in reports:
            row = [report.round, report.alpha_star, report.eps_rdp, report.eps_dp, report.delta]
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_attack_csv(reports, path):
    with open(path, "w") as fh:
        fh.write(ATTACK_CSV_HEADER + "\n")
        for report in reports:
            if not report.attack:
                continue
            for row in report.attack["per_client"]:
                cells = [
                    report.round,
                    row["client"],
                    row["le_acc"],
                    row["ln_acc"],
                    row["idlg_mse"],
                    row["visible_fraction"],
                ]
                fh.write(",".join(_fmt(v) for v in cells) + "\n")
