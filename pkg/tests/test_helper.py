# !/usr/bin/env python3
"""
Test helper utilities
"""
import csv
import os
import sys
from pathlib import Path

import numpy as np

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from services.roc_service import Samples

PATIENT_HEADER = [
    "patient_id",
    "sex",
    "race_ethnicity",
    "age",
    "years_with_diabetes",
    "diabetic",
    "dataset_id",
]
VISIT_HEADER = ["visit_id", "patient_id", "visit_date", "cataract", "iol"]
MEASUREMENT_HEADER = ["patient_id", "analyte", "value", "measured_date"]
SCORE_HEADER = [
    "image_id",
    "visit_id",
    "patient_id",
    "eye",
    "model_member",
    "target_name",
    "score",
]
ANNOTATION_HEADER = [
    "image_id",
    "pupil_cx",
    "pupil_cy",
    "pupil_w",
    "pupil_h",
    "iris_cx",
    "iris_cy",
    "iris_w",
    "iris_h",
]

# P1 has two visits 508 days apart, P2 one visit with male creatinine,
# P3 has unknown sex so its creatinine cannot become an eGFR.
PATIENTS = [
    ["P1", "Female", "White", "60", "10", "true", "ValA"],
    ["P2", "Male", "Black", "45", "", "true", "ValA"],
    ["P3", "Unknown", "Hispanic", "70", "5", "false", "DevTrain"],
]
VISITS = [
    ["V1", "P1", "2020-01-10", "false", "false"],
    ["V2", "P1", "2021-06-01", "true", "false"],
    ["V3", "P2", "2020-03-01", "", ""],
    ["V4", "P3", "2020-05-05", "false", "true"],
]
MEASUREMENTS = [
    ["P1", "Creatinine", "1.0", "2020-01-01"],
    ["P1", "Creatinine", "0.8", "2020-01-19"],
    ["P1", "ACR", "350", "2020-02-01"],
    ["P1", "SystolicBP", "130", "2020-01-10"],
    ["P1", "SystolicBP", "140", "2020-02-10"],
    ["P1", "DiastolicBP", "80", "2020-01-10"],
    ["P1", "Weight", "70", "2020-01-10"],
    ["P1", "Height", "1.75", "2019-06-01"],
    ["P1", "HbA1c", "7.5", "2019-09-01"],
    ["P2", "Creatinine", "1.0", "2020-03-01"],
    ["P3", "Creatinine", "1.2", "2020-05-01"],
]
SCORES = [
    ["V1-L", "V1", "P1", "Left", "m0", "ACR>=300.0", "0.2"],
    ["V1-L", "V1", "P1", "Left", "m1", "ACR>=300.0", "0.4"],
    ["V1-R", "V1", "P1", "Right", "m0", "ACR>=300.0", "0.6"],
    ["V1-R", "V1", "P1", "Right", "m1", "ACR>=300.0", "0.8"],
    ["V2-L", "V2", "P1", "Left", "m0", "ACR>=300.0", "0.3"],
    ["V3-L", "V3", "P2", "Left", "m0", "ACR>=300.0", "0.1"],
    ["V4-L", "V4", "P3", "left", "m0", "ACR>=300.0", "0.9"],
]
ANNOTATIONS = [
    ["V1-L", "293.5", "293.5", "60", "60", "293.5", "293.5", "200", "200"],
    ["V1-R", "293.5", "293.5", "80", "80", "293.5", "293.5", "200", "200"],
]


def write_rows(path, header, rows):
    """Write a CSV file with the given header and rows"""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_cohort_files(
    directory,
    patients=None,
    visits=None,
    measurements=None,
    scores=None,
    annotations=None,
):
    """Write the hand-built cohort into ``directory``; returns the paths by kind"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return {
        "patients": write_rows(directory / "patients.csv", PATIENT_HEADER, patients or PATIENTS),
        "visits": write_rows(directory / "visits.csv", VISIT_HEADER, visits or VISITS),
        "measurements": write_rows(
            directory / "measurements.csv", MEASUREMENT_HEADER, measurements or MEASUREMENTS
        ),
        "scores": write_rows(directory / "scores.csv", SCORE_HEADER, scores or SCORES),
        "annotations": write_rows(
            directory / "annotations.csv", ANNOTATION_HEADER, annotations or ANNOTATIONS
        ),
    }


def pairwise_auc(positives, negatives):
    """O(mn) Mann-Whitney sum with ties counting one half"""
    total = 0.0
    for x in positives:
        for y in negatives:
            total += 1.0 if x > y else 0.5 if x == y else 0.0
    return total / (len(positives) * len(negatives))


def binormal_samples(rng, n_pos, n_neg, delta, noise=None):
    """Samples with scores N(delta, 1) for positives and N(0, 1) for negatives"""
    labels = np.r_[np.ones(n_pos, dtype=bool), np.zeros(n_neg, dtype=bool)]
    if noise is None:
        noise = rng.standard_normal(n_pos + n_neg)
    scores = delta * labels + noise
    unit_ids = [f"u{i:05d}" for i in range(n_pos + n_neg)]
    return Samples.from_arrays(unit_ids, scores, labels)


def make_samples(scores, labels, prefix="u"):
    """Samples from plain lists, with ids u000, u001, ..."""
    unit_ids = [f"{prefix}{i:03d}" for i in range(len(scores))]
    return Samples.from_arrays(unit_ids, scores, labels)
