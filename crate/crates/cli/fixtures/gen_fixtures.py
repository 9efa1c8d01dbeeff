"""Generate the unit conformance cases, the post-processing filter set and
the screening KB. Run from this directory: python3 gen_fixtures.py
"""

import json
from pathlib import Path

from gen_corpus import OTHER, Corpus, plain, prop

HERE = Path(__file__).parent


def dump(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")


def unit_cases():
    out = []

    def c(p, header, unit, vals=("2.5", "2.6"), cap="", values_out=None):
        d = {"property": p, "header": header, "caption": cap, "values": list(vals), "unit": unit}
        if values_out:
            d["values_out"] = values_out
        out.append(d)

    d = "density"
    for h in ["Density (g/cm3)", "Density (g·cm−3)", "Density (g cm-3)", "Density (g cm^-3)", "Density (g/cm³)",
              "Density (g/cc)", "Density [gm/cm3]", "ρ (g/ml)", "Density, g cm−3", "Density (g·cm^{-3})"]:
        c(d, h, "g/cm3")
    c(d, "Density (kg/m3)", "kg/m3", ("2510", "2600"))
    c(d, "Density (kg·m−3)", "kg/m3", ("2510", "2600"))
    # no unit anywhere: median-keyed default
    c(d, "Density", "g/cm3", ("2.51", "2.60"))
    c(d, "Density", "g/cm3", ("2.51", "2.60"), cap="Physical properties (density in g/cm3)")
    c(d, "Density (bananas)", "g/cm3", ("2.51", "2.60"))

    tg = "glass_transition_temperature"
    c(tg, "Tg (K)", "K", ("720", "735"))
    c(tg, "Tg (°C)", "degC", ("450", "462"))
    c(tg, "Tg (℃)", "degC", ("450", "462"))
    c(tg, "Tg (oC)", "degC", ("450", "462"))
    c(tg, "Tg [deg C]", "degC", ("450", "462"))
    c(tg, "Tg", "degC", ("450", "462"), cap="Thermal data (°C)")
    c(tg, "Tg", "K", ("720", "735"), cap="Characteristic temperatures in K")
    c("crystallization_temperature", "Tx (°C)", "degC", ("580", "601"))
    c("crystallization_temperature", "Tx (K)", "K", ("850", "870"))
    c("melting_temperature", "Tm (K)", "K", ("1100", "1150"), cap="Melting temperatures of the crystalline phases")
    c("liquidus_temperature", "TL (°C)", "degC", ("1020", "1045"))
    c("softening_point", "Ts (°C)", "degC", ("620", "640"))
    c("annealing_point", "Annealing point (K)", "K", ("800", "812"))

    ea = "activation_energy"
    c(ea, "Ea (eV)", "eV", ("0.52", "0.61"))
    c(ea, "Ea (kJ/mol)", "kJ/mol", ("52", "61"))
    c(ea, "Ea (kJ mol−1)", "kJ/mol", ("52", "61"))
    c(ea, "Activation energy (electron volt)", "eV", ("0.52", "0.61"))

    for h in ["CTE (×10−6 /K)", "CTE (10−6 K−1)", "α (10^-7/°C)", "CTE (×10−6 °C−1)"]:
        c("thermal_expansion_coefficient", h, "1/K", ("8.2", "9.1"))
    c("thermal_expansion_coefficient", "CTE (K-1)", "1/K", ("8.2e-6", "9.1e-6"))

    e = "youngs_modulus"
    c(e, "E (GPa)", "GPa", ("71", "73"))
    c(e, "E (MPa)", "MPa", ("71000", "73000"))
    c(e, "Young's modulus (gigapascal)", "GPa", ("71", "73"))
    c(e, "E", "", ("71", "73"), cap="Elastic data")
    c("shear_modulus", "G (GPa)", "GPa", ("28", "29"))
    c("bulk_modulus", "K (GPa)", "GPa", ("45", "47"))

    for h in ["KIc (MPa·m1/2)", "KIc (MPa m1/2)", "KIc (MPa m^0.5)", "KIc (MPa√m)", "KIc (MPa/sqrt(m))",
              "KIc (MN m-3/2)", "KIc (MPa·m^{1/2})"]:
        c("fracture_toughness", h, "MPa·m^0.5", ("0.72", "0.81"))

    h = "hardness"
    c(h, "Hardness (GPa)", "GPa", ("5.6", "6.1"))
    c(h, "Hardness", "GPa", ("2.3", "2.8"), cap="Hardness of the glasses")
    c(h, "Hv (kgf/mm2)", "HV", ("550", "580"))
    c(h, "Hardness", "HV", ("550", "580"), cap="Vickers hardness of glasses")
    c(h, "Microhardness", "HV", ("450", "480"))
    c(h, "Hardness (VHN)", "HV", ("550", "580"))
    c(h, "Knoop hardness", "HK", ("420", "440"))
    c(h, "Hardness (KHN)", "HK", ("420", "440"))
    c(h, "Brinell hardness", "HB", ("180", "190"))
    c(h, "Hardness (BHN)", "HB", ("180", "190"))
    c(h, "Rockwell hardness", "HR", ("60", "66"))
    c(h, "Hardness", "HRB", ("80", "84"), cap="Rockwell B scale hardness")
    c(h, "Hardness (HRC)", "HRC", ("45", "48"))
    c(h, "Mohs hardness", "Mohs", ("5.5", "6"))
    c(h, "Hardness (Shore A)", "ShA", ("70", "75"))
    c(h, "Shore D hardness", "ShD", ("60", "65"))
    c(h, "Hardness", "ShD", ("60", "65"), cap="Shore-D hardness")

    c("poisson_ratio", "Poisson's ratio", "", ("0.22", "0.25"))
    c("poisson_ratio", "ν (-)", "", ("0.22", "0.25"))
    c("refractive_index", "nd", "", ("1.51", "1.53"))
    c("refractive_index", "Refractive index (n)", "", ("1.51", "1.53"))
    c("refractive_index", "nd", "", ("1.51", "1.53"), cap="Optical data (λ = 589 nm)")
    c("abbe_value", "νd", "", ("55.1", "60.2"))
    c("abbe_value", "Abbe number", "", ("55.1", "60.2"))

    s = "electrical_conductivity"
    for hd in ["σ (S/cm)", "σ (S cm−1)", "σ (Ω−1·cm−1)", "σ ((Ω cm)-1)", "σ (mho/cm)"]:
        c(s, hd, "S/cm", ("1e-5", "2e-5"))
    c(s, "σ (S m−1)", "S/m", ("1e-3", "2e-3"))
    # resistivity on a conductivity axis
    c(s, "Conductivity (Ω·cm)", "S/cm", ("1e5", "2e4"), values_out=[1e-5, 5e-5])
    c(s, "Conductivity (ohm cm)", "S/cm", ("1e5", "2e4"), values_out=[1e-5, 5e-5])
    c(s, "Conductivity (Ω m)", "S/m", ("100", "50"), values_out=[0.01, 0.02])
    return out


def tuple(entity, p, value, unit, valid):
    return {"tuple": {"entity": entity, "property": p, "value": value, "unit": unit, "value_kind": "single"},
            "valid": valid}


def filter_tuples():
    e = lambda k: f"FILTER0_0_{k}_1_M{k}"
    rows = [
        ("density", -2.4, "g/cm3", False),
        ("density", 2.5, "g/cm3", True),
        ("density", 30.0, "g/cm3", False),
        ("density", 2500.0, "kg/m3", True),
        ("poisson_ratio", 0.71, "", False),
        ("poisson_ratio", 0.25, "", True),
        ("poisson_ratio", -1.2, "", False),
        ("poisson_ratio", 0.5, "", True),
        ("poisson_ratio", 0.3, "GPa", False),
        ("abbe_value", 60.0, "GPa", False),
        ("abbe_value", 60.0, "", True),
        ("abbe_value", 200.0, "", False),
        ("abbe_value", 45.0, "MPa", False),
        ("refractive_index", 0.5, "", False),
        ("refractive_index", 1.5, "", True),
        ("refractive_index", 1.6, "GPa", False),
        ("activation_energy", 0.9, "eV", True),
        ("activation_energy", 50.0, "eV", False),
        ("activation_energy", 150.0, "kJ/mol", True),
        ("glass_transition_temperature", 560.0, "degC", True),
        ("glass_transition_temperature", -40.0, "degC", False),
        ("youngs_modulus", 72.0, "GPa", True),
        ("youngs_modulus", 72.0, "K", False),
        ("electrical_conductivity", 1e-5, "S/cm", True),
    ]
    return [tuple(e(k + 1), *r) for k, r in enumerate(rows)]


def filter_tables():
    c = Corpus()
    p = "FILTER0000000001"
    c.add(p, 0, "Physical properties of the glasses", "Glass", ["G1", "G2", "G3", "G4"], [
        prop("Density (g/cm3)", "density", "g/cm3", ["2.51", "−2.40", "2.60", "2.55"], [2.51, None, 2.60, 2.55]),
        prop("Poisson's ratio", "poisson_ratio", "", ["0.22", "0.71", "0.25", "-1.3"], [0.22, None, 0.25, None]),
    ])
    # Tm names a dopant class here, not a melting point
    c.add(p, 1, "Transition metal (Tm) content and density of the doped glasses", "Glass", ["D1", "D2"], [
        prop("Tm", "melting_temperature", "", ["0.2", "0.5"], [None, None]),
        prop("Density (g/cm3)", "density", "g/cm3", ["3.10", "3.20"], [3.10, 3.20]),
    ])
    c.add(p, 2, "Melting behaviour of the crystalline phases", "Phase", ["C1", "C2"], [
        prop("Tm (K)", "melting_temperature", "K", ["1100", "1150"], [1100.0, 1150.0]),
        plain("Remarks", OTHER, ["", "sharp"]),
    ])
    c.add(p, 3, "Optical constants", "Glass", ["O1", "O2", "O3"], [
        prop("nd", "refractive_index", "", ["1.52", "0.40", "1.55"], [1.52, None, 1.55]),
        prop("νd", "abbe_value", "", ["58.1", "320", "55.0"], [58.1, None, 55.0]),
    ])
    c.add(p, 4, "Activation energies of conduction", "Glass", ["A1", "A2"], [
        prop("Ea (eV)", "activation_energy", "eV", ["0.61", "35.0"], [0.61, None]),
    ])
    return c


def screen_kb():
    """Ten records; R3 and R7 satisfy the three-way screen, the rest miss by one condition."""
    props = {
        1: [("hardness", 12.0, "GPa"), ("fracture_toughness", 2.1, "MPa·m^0.5"), ("poisson_ratio", 0.27, "")],
        2: [("hardness", 600.0, "HV"), ("fracture_toughness", 3.5, "MPa·m^0.5"), ("poisson_ratio", 0.3, "")],
        3: [("hardness", 10.0, "GPa"), ("fracture_toughness", 3.0, "MPa·m^0.5"), ("poisson_ratio", 0.25, "")],
        4: [("hardness", 14.0, "GPa"), ("fracture_toughness", 3.8, "MPa·m^0.5"), ("poisson_ratio", 0.21, "")],
        5: [("hardness", 9.9, "GPa"), ("fracture_toughness", 4.0, "MPa·m^0.5"), ("poisson_ratio", 0.3, "")],
        6: [("hardness", 11.0, "GPa"), ("fracture_toughness", 3.2, "MPa·m^0.5")],
        7: [("hardness", 15.5, "GPa"), ("fracture_toughness", 4.4, "MPa·m^0.5"), ("poisson_ratio", 0.31, ""),
            ("density", 3.2, "g/cm3")],
        8: [("density", 2.5, "g/cm3"), ("youngs_modulus", 80.0, "GPa")],
        9: [("hardness", 11.0, "MPa"), ("fracture_toughness", 3.1, "MPa·m^0.5"), ("poisson_ratio", 0.26, "")],
        10: [("hardness", 13.0, "GPa"), ("fracture_toughness", 2.99, "MPa·m^0.5"), ("poisson_ratio", 0.4, "")],
    }
    rows = [{"schema": "tablekb.kb", "version": 1}]
    for k, ps in props.items():
        pii = f"S00000000000000{k:02d}"
        mid = f"R{k}"
        rows.append({
            "properties": [
                {"entity": f"{pii}_0_1_{j}_{mid}", "property": p, "value": v, "unit": u, "value_kind": "single"}
                for j, (p, v, u) in enumerate(ps, start=1)
            ],
            "provenance": {"pii": pii, "tables": [0], "link_kind": "unlinked-property", "orientation": "col"},
            "gid": mid,
        })
    return rows


def main():
    dump(HERE / "units.jsonl", unit_cases())
    dump(HERE / "filter_tuples.jsonl", filter_tuples())
    c = filter_tables()
    dump(HERE / "filter_tables.jsonl", c.tables)
    dump(HERE / "filter_gold.jsonl", c.gold)
    dump(HERE / "screen_kb.jsonl", screen_kb())
    print(f"{len(unit_cases())} unit cases, {len(filter_tuples())} filter tuples, {len(c.gold)} filter gold")


if __name__ == "__main__":
    main()
