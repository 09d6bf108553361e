"""Regenerate src/menet/data/baseline.json, the synthetic baseline scenario.

Every number here is an illustrative choice for a mid-sized campus network
(hundreds of kW), not data from any published case study.
"""

import argparse
import json
from pathlib import Path

import numpy as np

HOURS = np.arange(24)

# load well above local generation at peak, so the tie-line carries the peak
LOAD_E = [900, 860, 840, 860, 920, 1080, 1360, 1640, 1900, 2160, 2300, 2240,
          1800, 1640, 1600, 1680, 1920, 2400, 2800, 2900, 2700, 2000, 1400, 1040]
LOAD_H = [480, 490, 500, 490, 470, 450, 420, 380, 340, 300, 270, 250,
          240, 230, 230, 240, 270, 310, 360, 400, 430, 450, 460, 470]
WT_UNIT = [75, 78, 80, 76, 72, 68, 62, 55, 48, 42, 38, 35,
           33, 35, 38, 42, 48, 55, 60, 65, 70, 72, 74, 76]
PEAK = list(range(9, 12)) + list(range(17, 21))
VALLEY = list(range(0, 9)) + list(range(12, 17)) + list(range(21, 24))


def pv_unit(peak_kw=10.0):
    # daylight 6:00-18:00, half-sine over step midpoints
    x = (HOURS + 0.5 - 6.0) / 12.0
    return np.round(np.where((x > 0) & (x < 1), peak_kw * np.sin(np.pi * np.clip(x, 0, 1)), 0.0), 4)


def tou_buy():
    price = np.full(24, 0.65)
    price[PEAK] = 1.05
    price[[0, 1, 2, 3, 4, 5, 6, 22, 23]] = 0.35
    return price


def build() -> dict:
    stations = []
    layouts = [
        ("1", 14, [(8.5, 1.0, 3.0), (18.5, 1.5, 1.0)]),
        ("2", 18, [(8.0, 1.5, 1.0), (18.0, 1.5, 1.0)]),
        ("3", 12, [(18.5, 1.0, 3.0), (9.0, 1.5, 1.0)]),
        ("4", 20, [(7.5, 1.0, 1.0), (19.0, 1.5, 2.0)]),
    ]
    for k, (sid, n, cohorts) in enumerate(layouts):
        stations.append({
            "station_id": sid,
            "fleet": {
                "n_evs": n,
                "seed": 101 + k,
                "cohorts": [{"mean_hour": m, "std_hour": s, "weight": w} for m, s, w in cohorts],
                "stay_hours": [6.0, 12.0],
                "soc_arrive_frac": [0.2, 0.5],
                "soc_leave_frac": [0.8, 0.95],
                "soc_min_frac": 0.1,
                "capacity_kwh": [40.0, 80.0],
                "p_ch_max": 7.0,
                "p_dis_max": 7.0,
                "eta_ch": 0.95,
                "eta_dis": 0.95,
                "eta_ref": 1.0,
            },
        })
    pv = pv_unit()
    return {
        "version": 1,
        "name": "baseline",
        "day_ahead_grid": {"start_hour": 0.0, "step_minutes": 60, "n_steps": 24},
        "intra_day_grid": {"start_hour": 0.0, "step_minutes": 15, "n_steps": 96},
        "loads": {"electric": [float(v) for v in LOAD_E], "heat": [float(v) for v in LOAD_H]},
        "renewables": {
            "pv": {"n_units": 40, "unit_forecast": pv.tolist(), "sigma_fraction": 0.1, "seed": 7},
            "wt": {"n_units": 3, "unit_forecast": [float(v) for v in WT_UNIT], "sigma_fraction": 0.1, "seed": 8},
        },
        "devices": {
            "grid": {
                "p_min": -500.0,
                "p_max": 3500.0,
                "price_buy": tou_buy().tolist(),
                "price_sell": [0.3] * 24,
                "sigma_gird": 0.02,
            },
            "gas_turbine": {
                "p_min": 50.0,
                "p_max": 300.0,
                "fuel_coeffs": [1e-6, 1e-4, 0.35, 15.0],
                "cost_up": 20.0,
                "cost_down": 5.0,
                "k_pollution": 0.02,
                "ramp_up": 100.0,
                "ramp_down": 100.0,
                "pwl_segments": 8,
            },
            "battery": {
                "capacity": 500.0,
                "p_rated": 150.0,
                "soc_min": 0.1,
                "soc_max": 0.9,
                "soc_start": 0.5,
                "eta_ch": 0.95,
                "eta_dis": 0.95,
                "k_loss": 0.01,
            },
            "heat": {
                "hp_q_max": 600.0,
                "hp_cop": 3.0,
                "hs_ch_min": 10.0,
                "hs_ch_max": 150.0,
                "hs_dis_min": 10.0,
                "hs_dis_max": 150.0,
                "hs_capacity": 400.0,
                "hs_soc_start": 0.5,
                "sigma_hp": 0.04,
                "sigma_hs": 0.02,
            },
        },
        "stations": stations,
        "dr": {
            "shiftable_fraction_e": 0.1,
            "curtail_cap_e": [40.0] * 24,
            "curtail_cap_h": [30.0] * 24,
            "lambda_e": 0.8,
            "lambda_h": 0.5,
            "peak_steps": PEAK,
            "valley_steps": VALLEY,
        },
        "eta_confidence": 0.95,
        "prices": {"lambda_cur": 0.05, "c_evc": 0.01},
        "penalty_rate": 0.8,
        "rolling": {},
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src/menet/data/baseline.json"))
    args = ap.parse_args()
    Path(args.out).write_text(json.dumps(build(), indent=1) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
