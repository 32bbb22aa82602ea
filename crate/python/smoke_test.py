"""Smoke test for the Python bindings: run after `maturin develop`."""

import json
import math
import pathlib

import markov_search as ms

ROOT = pathlib.Path(__file__).resolve().parent.parent
EXAMPLES = ROOT / "instances" / "examples"


def close(a, b, tol=1e-9):
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)


def main():
    boxes = ms.Instance.load(EXAMPLES / "two_coin_boxes.json")
    assert boxes.kind == "cms" and len(boxes) == 2, boxes
    assert close(boxes.oracle(), 0.6)
    relax = boxes.exante()
    assert close(relax["objective"], 0.8)
    report = boxes.prophet(trials=4000, seed=1)
    assert report["mean"] + 4 * report["se"] >= report["bound"], report

    actions = ms.Instance.from_json((EXAMPLES / "two_actions.json").read_text())
    best = actions.saup(0.5)["processes"][0]
    assert close(best["value"], 1.1) and best["policy"][0]["action"] == "a2", best

    again = ms.Instance.from_json(boxes.to_json())
    assert close(again.oracle(), boxes.oracle())

    noi = ms.Instance.load(EXAMPLES / "noi_two_boxes.json")
    pc = noi.convert("pandora_cabinets")
    assert pc.kind == "pandora_cabinets"
    assert close(pc.oracle(), noi.oracle())
    assert noi.convert("cms").oracle() <= noi.oracle() + 1e-9

    cab = ms.random_instance("cabinets", 4, seed=7)
    assert cab.oracle() <= cab.exante()["objective"] + 1e-9

    try:
        ms.random_instance("cms", 24, seed=1).oracle()
    except ms.SizeLimitError:
        pass
    else:
        raise AssertionError("expected a size limit error")

    try:
        ms.Instance.from_json(json.dumps({"kind": "noi_pandora", "boxes": [{"cost": 1, "atoms": []}]}))
    except ms.MarkovSearchError:
        pass
    else:
        raise AssertionError("expected a validation error")

    print("python bindings OK")


if __name__ == "__main__":
    main()
