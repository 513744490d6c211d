#!/usr/bin/env python3
"""Writes data/tabular_sample.csv: synthetic network-connection records in the
41-attribute intrusion-detection layout with a normal/anomaly label.

The rows are generated, not sampled from any real capture. Anomalies skew towards
S0/REJ flags, high error rates and bursty counts; udp/icmp traffic is noisier so
the protocol attribute carries a fairness gap.
"""

import argparse
import csv
import math
import random
from pathlib import Path

CONTINUOUS = [
    "src_bytes", "dst_bytes", "land", "wrong_fragment", "urgent", "hot",
    "num_failed_logins", "logged_in", "num_compromised", "root_shell", "su_attempted",
    "num_root", "num_file_creations", "num_shells", "num_access_files",
    "num_outbound_cmds", "is_host_login", "is_guest_login", "count", "srv_count",
    "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
    "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
    "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate", "dst_host_srv_serror_rate", "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
]
HEADER = ["duration", "protocol_type", "service", "flag"] + CONTINUOUS + ["label"]
SERVICES = ["http", "ftp", "smtp", "private", "domain_u", "other"]


def clip01(x):
    return min(1.0, max(0.0, x))


def row(rng):
    anomaly = rng.random() < 0.45
    protocol = rng.choices(["tcp", "udp", "icmp"], weights=[0.7, 0.2, 0.1])[0]
    # non-tcp records blur the class signal
    noise = 0.12 if protocol == "tcp" else 0.3
    a = 1.0 if anomaly else 0.0
    if rng.random() < noise:
        a = 1.0 - a

    if protocol == "udp":
        service = rng.choice(["domain_u", "private", "other"])
    elif protocol == "icmp":
        service = rng.choice(["private", "other"])
    else:
        service = rng.choices(SERVICES, weights=[5, 1, 1, 2 + 4 * a, 0.2, 1])[0]
    flag = rng.choices(["SF", "S0", "REJ", "RSTR"], weights=[8 - 6 * a, 1 + 4 * a, 0.5 + 2 * a, 0.3])[0]

    def rate(base):
        return round(clip01(rng.gauss(base, 0.15)), 2)

    serror = 0.05 + 0.6 * a
    rerror = 0.05 + 0.25 * a
    same_srv = 0.85 - 0.6 * a
    count = max(0, int(rng.expovariate(1.0 / (10 + 180 * a))))
    values = {
        "duration": int(rng.expovariate(1.0 / (30 - 25 * a))) if protocol == "tcp" else 0,
        "src_bytes": int(math.exp(rng.gauss(6.0 - 3.0 * a, 1.5))),
        "dst_bytes": int(math.exp(rng.gauss(7.0 - 4.0 * a, 2.0))),
        "land": int(rng.random() < 0.002),
        "wrong_fragment": int(rng.random() < 0.01 + 0.03 * a) * rng.randint(1, 3),
        "urgent": int(rng.random() < 0.001),
        "hot": rng.randint(0, 2) if rng.random() < 0.1 else 0,
        "num_failed_logins": int(rng.random() < 0.01 + 0.02 * a),
        "logged_in": int(rng.random() < 0.75 - 0.55 * a),
        "num_compromised": int(rng.random() < 0.01 + 0.02 * a),
        "root_shell": int(rng.random() < 0.003 + 0.01 * a),
        "su_attempted": int(rng.random() < 0.002),
        "num_root": int(rng.random() < 0.01) * rng.randint(1, 5),
        "num_file_creations": int(rng.random() < 0.02) * rng.randint(1, 4),
        "num_shells": int(rng.random() < 0.002),
        "num_access_files": int(rng.random() < 0.01),
        "num_outbound_cmds": 0,
        "is_host_login": 0,
        "is_guest_login": int(rng.random() < 0.01),
        "count": min(511, count),
        "srv_count": min(511, max(0, int(count * rng.uniform(0.1, 1.0)))),
        "serror_rate": rate(serror),
        "srv_serror_rate": rate(serror),
        "rerror_rate": rate(rerror),
        "srv_rerror_rate": rate(rerror),
        "same_srv_rate": rate(same_srv),
        "diff_srv_rate": rate(0.05 + 0.3 * a),
        "srv_diff_host_rate": rate(0.1),
        "dst_host_count": min(255, max(0, int(rng.gauss(150 + 80 * a, 60)))),
        "dst_host_srv_count": min(255, max(0, int(rng.gauss(180 - 150 * a, 60)))),
        "dst_host_same_srv_rate": rate(same_srv),
        "dst_host_diff_srv_rate": rate(0.05 + 0.3 * a),
        "dst_host_same_src_port_rate": rate(0.2),
        "dst_host_srv_diff_host_rate": rate(0.05),
        "dst_host_serror_rate": rate(serror),
        "dst_host_srv_serror_rate": rate(serror),
        "dst_host_rerror_rate": rate(rerror),
        "dst_host_srv_rerror_rate": rate(rerror),
    }
    values.update(protocol_type=protocol, service=service, flag=flag,
                  label="anomaly" if anomaly else "normal")
    return [values[h] for h in HEADER]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=3000)
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data" / "tabular_sample.csv")
    args = parser.parse_args()

    rng = random.Random(args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with args.out.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(HEADER)
        for _ in range(args.rows):
            w.writerow(row(rng))


if __name__ == "__main__":
    main()
