"""Generate the 20-table gold corpus, its gold tuples and a reference database.

Gold tuples are written from the planted values, not parsed back from the
cell text. Run from this directory: python3 gen_corpus.py
"""

import json
from pathlib import Path

OUT = Path(__file__).parent / "corpus"

CODES = {
    "activation_energy": 4, "annealing_point": 5, "crystallization_temperature": 6,
    "glass_transition_temperature": 7, "liquidus_temperature": 8, "melting_temperature": 9,
    "softening_point": 10, "thermal_expansion_coefficient": 11, "bulk_modulus": 12,
    "density": 13, "fracture_toughness": 14, "hardness": 15, "poisson_ratio": 16,
    "shear_modulus": 17, "youngs_modulus": 18, "abbe_value": 19, "refractive_index": 20,
    "electrical_conductivity": 21,
}
OTHER, CONSTITUENT, COMPOSITION, GID = 0, 1, 2, 3


def prop(header, key, unit, cells, values, kinds=None):
    return {"header": header, "label": CODES[key], "key": key, "unit": unit,
            "cells": cells, "values": values, "kinds": kinds or ["single"] * len(cells)}


def plain(header, label, cells):
    return {"header": header, "label": label, "cells": cells}


def fmt(vals, d=2):
    return [f"{v:.{d}f}" for v in vals]


class Corpus:
    def __init__(self):
        self.tables = []
        self.gold = []
        self.db = []

    def add(self, pii, tid, caption, gid_header, gids, lines, orient="col", row_label_override=None):
        """`lines` are the non-gid lines; orient says whether they are columns."""
        n_mat = len(gids)
        grid = [[gid_header] + list(gids)]
        labels = [GID]
        for ln in lines:
            assert len(ln["cells"]) == n_mat
            grid.append([ln["header"]] + ln["cells"])
            labels.append(ln["label"])
        # grid[i] is line i; transpose for column orientation
        if orient == "col":
            cells = [list(r) for r in zip(*grid)]
            col_labels = labels
            row_labels = row_label_override or [OTHER] * len(cells)
        else:
            cells = grid
            row_labels = labels
            col_labels = row_label_override or [OTHER] * len(cells[0])
        self.tables.append({"pii": pii, "table_index": tid, "caption": caption, "cells": cells,
                            "row_labels": row_labels, "col_labels": col_labels})
        for i, ln in enumerate(lines, start=1):
            if "key" not in ln:
                continue
            for k, (v, kind) in enumerate(zip(ln["values"], ln["kinds"]), start=1):
                if v is None:
                    continue
                r, c = (k, i) if orient == "col" else (i, k)
                mid = gids[k - 1].strip().replace("_", "-")
                self.gold.append({"entity": f"{pii}_{tid}_{r}_{c}_{mid}", "property": ln["key"],
                                  "value": v, "unit": ln["unit"], "value_kind": kind})

    def comp_rows(self, n):
        return [CONSTITUENT] * n


def build():
    c = Corpus()

    # article 1: composition table and a property table sharing ids
    p = "S0022309318000011"
    c.add(p, 0, "Nominal compositions of the soda-lime glasses", "Glass", ["G1", "G2", "G3"], [
        plain("SiO2 (mol%)", COMPOSITION, ["70", "72", "74"]),
        plain("Na2O (mol%)", COMPOSITION, ["20", "18", "16"]),
        plain("CaO (mol%)", COMPOSITION, ["10", "10", "10"]),
    ], row_label_override=[OTHER, CONSTITUENT, CONSTITUENT, CONSTITUENT])
    c.add(p, 1, "Physical properties of the glasses", "Glass", ["G1", "G2", "g3 "], [
        prop("Density (g/cm3)", "density", "g/cm3", fmt([2.51, 2.49, 2.47]), [2.51, 2.49, 2.47]),
        prop("Tg (°C)", "glass_transition_temperature", "degC", ["560", "571", "583"], [560, 571, 583]),
        prop("E (GPa)", "youngs_modulus", "GPa", fmt([72.4, 73.1, 74.0], 1), [72.4, 73.1, 74.0]),
    ])

    # article 2: mixed composition/property table, then a row-oriented property table
    p = "S0022309318000023"
    c.add(p, 0, "Composition and density of borosilicate glasses", "Sample", ["B1", "B2", "B3"], [
        plain("SiO2 (mol%)", COMPOSITION, ["60", "65", "70"]),
        plain("B2O3 (mol%)", COMPOSITION, ["25", "20", "15"]),
        plain("Na2O (mol%)", COMPOSITION, ["15", "15", "15"]),
        prop("ρ (g/cm3)", "density", "g/cm3", fmt([2.39, 2.41, 2.44]), [2.39, 2.41, 2.44]),
    ], row_label_override=[OTHER, CONSTITUENT, CONSTITUENT, CONSTITUENT])
    c.add(p, 1, "Elastic properties measured by ultrasonic echography", "Sample", ["B1", "B2", "B3"], [
        prop("Young's modulus (GPa)", "youngs_modulus", "GPa", fmt([65.2, 66.8, 68.1], 1), [65.2, 66.8, 68.1]),
        prop("Shear modulus (GPa)", "shear_modulus", "GPa", fmt([26.7, 27.3, 27.9], 1), [26.7, 27.3, 27.9]),
        prop("Poisson's ratio", "poisson_ratio", "", fmt([0.22, 0.22, 0.23]), [0.22, 0.22, 0.23]),
    ], orient="row")

    # article 3: characteristic temperatures in K, then in degC from the caption
    p = "S0022309318000035"
    c.add(p, 0, "Characteristic temperatures of chalcogenide glasses", "Glass", ["C1", "C2", "C3", "C4"], [
        prop("Tg (K)", "glass_transition_temperature", "K", ["455", "462", "470", "481"], [455, 462, 470, 481]),
        prop("Tx (K)", "crystallization_temperature", "K", ["560", "575", "590", "602"], [560, 575, 590, 602]),
        prop("Tl (K)", "liquidus_temperature", "K", ["780", "792", "805", "811"], [780, 792, 805, 811]),
    ])
    c.add(p, 1, "Thermal data of the annealed samples (°C)", "Glass", ["C1", "C2", "C3"], [
        prop("Tg", "glass_transition_temperature", "degC", ["182", "189", "197"], [182, 189, 197]),
        prop("Tx", "crystallization_temperature", "degC", ["287", "302", "317"], [287, 302, 317]),
    ])

    # article 4: optical constants and mechanical response
    p = "S0022309318000047"
    c.add(p, 0, "Optical constants of the tellurite glasses", "Glass", ["T1", "T2", "T3"], [
        prop("nd", "refractive_index", "", ["2.0412", "2.0587", "2.0733"], [2.0412, 2.0587, 2.0733]),
        prop("νd", "abbe_value", "", fmt([18.2, 17.6, 17.1], 1), [18.2, 17.6, 17.1]),
    ])
    c.add(p, 1, "Indentation results", "Glass", ["T1", "T2", "T3"], [
        prop("Vickers hardness (HV)", "hardness", "HV", ["395", "402", "411"], [395, 402, 411]),
        prop("KIc (MPa m1/2)", "fracture_toughness", "MPa·m^0.5", fmt([0.52, 0.55, 0.58]), [0.52, 0.55, 0.58]),
    ])

    # article 5: density in kg/m3 with scaled expansion; conductivity
    p = "S0022309318000059"
    c.add(p, 0, "Density and thermal expansion of phosphate glasses", "Sample", ["P-1", "P-2", "P-3"], [
        prop("Density (kg/m3)", "density", "kg/m3", ["2650", "2710", "2768"], [2650, 2710, 2768]),
        prop("CTE (×10−6 /K)", "thermal_expansion_coefficient", "1/K", fmt([12.5, 11.8, 11.2], 1),
             [12.5e-6, 11.8e-6, 11.2e-6]),
    ])
    c.add(p, 1, "Electrical conductivity and activation energy of the glasses", "Sample", ["P-1", "P-2", "P-3"], [
        prop("Ea (eV)", "activation_energy", "eV", fmt([0.81, 0.77, 0.74]), [0.81, 0.77, 0.74]),
        prop("σ (S/cm)", "electrical_conductivity", "S/cm", ["1.2e-7", "3.4e-7", "8.9e-7"], [1.2e-7, 3.4e-7, 8.9e-7]),
    ])

    # article 6: uncertainties and ranges; a table with no properties
    p = "S0022309318000060"
    c.add(p, 0, "Measured density and glass transition of the specimens", "Specimen", ["A_1", "A_2", "A_3"], [
        prop("Density (g/cm3)", "density", "g/cm3", ["2.51 ± 0.01", "2.53 ± 0.01", "2.56 ± 0.02"], [2.51, 2.53, 2.56]),
        prop("Tg (°C)", "glass_transition_temperature", "degC", ["520–530", "534–540", "548–556"], [525, 537, 552],
             ["mean_of_range"] * 3),
    ])
    c.add(p, 1, "Suppliers of the raw materials", "Glass", ["A_1", "A_2", "A_3"], [
        plain("Supplier", OTHER, ["Merck", "Alfa Aesar", "Sigma"]),
        plain("Appearance", OTHER, ["clear", "clear", "amber"]),
    ])

    # article 7: row-oriented wt% composition table and a mechanical table
    p = "S0022309318000072"
    c.add(p, 0, "Batch compositions of the aluminosilicate glasses (wt%)", "Glass", ["AS1", "AS2", "AS3"], [
        plain("SiO2", COMPOSITION, ["55.0", "58.0", "61.0"]),
        plain("Al2O3", COMPOSITION, ["25.0", "22.0", "19.0"]),
        plain("CaO", COMPOSITION, ["20.0", "20.0", "20.0"]),
    ], orient="row", row_label_override=[OTHER, CONSTITUENT, CONSTITUENT, CONSTITUENT])
    c.add(p, 1, "Mechanical properties of the aluminosilicate glasses", "Glass", ["AS1", "AS2", "AS3"], [
        prop("Bulk modulus (GPa)", "bulk_modulus", "GPa", fmt([55.3, 53.9, 52.1], 1), [55.3, 53.9, 52.1]),
        prop("Shear modulus (GPa)", "shear_modulus", "GPa", fmt([34.2, 33.5, 32.8], 1), [34.2, 33.5, 32.8]),
        prop("Fracture toughness (MPa·m1/2)", "fracture_toughness", "MPa·m^0.5", fmt([0.91, 0.88, 0.85]),
             [0.91, 0.88, 0.85]),
    ])

    # article 8: viscosity points, optics with Knoop hardness, activation energy, row table
    p = "S0022309318000084"
    c.add(p, 0, "Viscosity reference points of the glasses", "Glass", ["V1", "V2", "V3"], [
        prop("Softening point (°C)", "softening_point", "degC", ["728", "741", "755"], [728, 741, 755]),
        prop("Annealing point (°C)", "annealing_point", "degC", ["545", "552", "561"], [545, 552, 561]),
        prop("Liquidus temperature (°C)", "liquidus_temperature", "degC", ["1010", "1032", "1045"],
             [1010, 1032, 1045]),
    ])
    c.add(p, 1, "Density, refractive index and Knoop hardness", "Sample", ["V1", "V2", "V3"], [
        prop("Density (g/cm3)", "density", "g/cm3", fmt([2.62, 2.64, 2.67]), [2.62, 2.64, 2.67]),
        prop("Refractive index", "refractive_index", "", ["1.5231", "1.5262", "1.5298"], [1.5231, 1.5262, 1.5298]),
        prop("Knoop hardness (HK)", "hardness", "HK", ["512", "525", "538"], [512, 525, 538]),
    ])
    c.add(p, 2, "Activation energies for viscous flow", "Sample", ["V1", "V2", "V3"], [
        prop("Activation energy (kJ/mol)", "activation_energy", "kJ/mol", ["612", "598", "585"], [612, 598, 585]),
        prop("Melting temperature (°C)", "melting_temperature", "degC", ["1480", "1495", "1510"], [1480, 1495, 1510]),
    ])
    c.add(p, 3, "Summary of the selected compositions", "Sample", ["V1", "V3"], [
        prop("Density (g/cm3)", "density", "g/cm3", fmt([2.62, 2.67]), [2.62, 2.67]),
        prop("Tg (°C)", "glass_transition_temperature", "degC", ["541", "556"], [541, 556]),
        prop("Poisson's ratio", "poisson_ratio", "", fmt([0.21, 0.22]), [0.21, 0.22]),
    ], orient="row")

    # article 9: composition with the unit in the caption, then mixed mechanics
    p = "S0022309318000096"
    c.add(p, 0, "Glass compositions (mol%) and densities", "Glass", ["L1", "L2", "L3"], [
        plain("SiO2", COMPOSITION, ["67", "70", "73"]),
        plain("Li2O", COMPOSITION, ["33", "30", "27"]),
        prop("Density (g/cm3)", "density", "g/cm3", fmt([2.33, 2.34, 2.35]), [2.33, 2.34, 2.35]),
    ], row_label_override=[OTHER, CONSTITUENT, CONSTITUENT, CONSTITUENT])
    c.add(p, 1, "Hardness and elastic modulus from nanoindentation", "Glass", ["L1", "L2", "L3"], [
        prop("Hardness (GPa)", "hardness", "GPa", fmt([5.8, 6.0, 6.1], 1), [5.8, 6.0, 6.1]),
        prop("E (GPa)", "youngs_modulus", "GPa", fmt([79.5, 81.2, 82.0], 1), [79.5, 81.2, 82.0]),
        plain("Remarks", OTHER, ["", "cracked", ""]),
    ])
    return c


def reference_db(c):
    """One record per material with its planted property values."""
    by_mat = {}
    for g in c.gold:
        pii, tid, _, _, mid = g["entity"].split("_", 4)
        rec = by_mat.setdefault((pii, mid), {"id": f"{pii}:{mid}", "composition": {}, "properties": {}})
        rec["properties"].setdefault(g["property"], {"value": g["value"], "unit": g["unit"]})
    return [by_mat[k] for k in sorted(by_mat)]


def main():
    c = build()
    assert len(c.tables) == 20, len(c.tables)
    OUT.mkdir(exist_ok=True)
    dump = lambda rows: "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows)
    (OUT / "tables.jsonl").write_text(dump(c.tables), encoding="utf-8")
    unlabeled = [{k: v for k, v in t.items() if k not in ("row_labels", "col_labels")} for t in c.tables]
    (OUT / "tables_unlabeled.jsonl").write_text(dump(unlabeled), encoding="utf-8")
    (OUT / "gold.jsonl").write_text(dump(c.gold), encoding="utf-8")
    (OUT / "db.jsonl").write_text(dump(reference_db(c)), encoding="utf-8")
    print(f"{len(c.tables)} tables, {len(c.gold)} gold tuples")


if __name__ == "__main__":
    main()
