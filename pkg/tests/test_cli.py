import json

import pytest

from fixture_data import FIXTURE_CATALOG_JSON, PATHOLOGIES, build_planted_fixture

from obsdx.catalog import PromptStyle, parse_catalog, render_prompt
from obsdx.cli import main
from obsdx.store import open_store


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Files for CLI runs: planted fixture catalog/config/labels plus an NB fixture."""
    root = tmp_path_factory.mktemp("cli")
    fixture = build_planted_fixture(seed=2024, n_studies=50, dimension=512)

    catalog_path = root / "catalog.json"
    catalog_path.write_text(FIXTURE_CATALOG_JSON, encoding="utf-8")
    labels_path = root / "labels.csv"
    labels_path.write_text(fixture.labels_csv(), encoding="utf-8")
    config_path = root / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "backend": f"synthetic:{fixture.seed}",
                "synthetic": {
                    "dimension": fixture.dimension,
                    "alpha": fixture.alpha,
                    "planted": fixture.planted,
                },
            }
        ),
        encoding="utf-8",
    )

    # perfectly separable single-pathology fixture for the NB commands
    nb_catalog = parse_catalog(
        json.dumps(
            [
                {
                    "name": "Pneumonia",
                    "descriptors": [{"text": "cavitation"}, {"text": "air bronchograms", "plural": True}],
                }
            ]
        ),
        name="nb-fixture",
    )
    nb_catalog_path = root / "nb_catalog.json"
    nb_catalog_path.write_text(
        json.dumps(
            [
                {
                    "name": "Pneumonia",
                    "descriptors": [
                        {"text": "cavitation"},
                        {"text": "air bronchograms", "plural": True},
                    ],
                }
            ]
        ),
        encoding="utf-8",
    )
    pneumonia = nb_catalog.get("Pneumonia")
    planted = {}
    rows = []
    for i in range(24):
        present = i % 2 == 0
        key = f"nb{i:02d}/frontal"
        for descriptor in pneumonia.descriptors:
            polarity = "positive" if present else "negative"
            prompt = render_prompt(PromptStyle.REPORT_STYLE, descriptor, pneumonia, polarity)
            planted.setdefault(prompt, []).append(key)
        rows.append((f"nb{i:02d}/frontal", int(present)))
    nb_config_path = root / "nb_config.json"
    nb_config_path.write_text(
        json.dumps(
            {
                "backend": "synthetic:77",
                "synthetic": {"dimension": 256, "planted": planted},
            }
        ),
        encoding="utf-8",
    )
    train_csv = root / "nb_train.csv"
    eval_csv = root / "nb_eval.csv"
    header = "Path,Pneumonia\n"
    train_csv.write_text(
        header + "\n".join(f"{p},{y}" for p, y in rows[:12]) + "\n", encoding="utf-8"
    )
    eval_csv.write_text(
        header + "\n".join(f"{p},{y}" for p, y in rows[12:]) + "\n", encoding="utf-8"
    )

    return {
        "root": root,
        "fixture": fixture,
        "catalog": catalog_path,
        "labels": labels_path,
        "config": config_path,
        "nb_catalog": nb_catalog_path,
        "nb_config": nb_config_path,
        "nb_train": train_csv,
        "nb_eval": eval_csv,
    }


def run_cli(args):
    return main([str(a) for a in args])


class TestDiagnose:
    def test_planted_study_named_first_with_single_view_summary(self, workdir, tmp_path, capsys):
        fixture = workdir["fixture"]
        sick = next(
            s for s in fixture.study_ids if fixture.labels[s]["Pneumonia"] == 1
            and sum(fixture.labels[s][p] for p in PATHOLOGIES) == 1
        )
        out = tmp_path / "report.json"
        code = run_cli(
            [
                "diagnose", sick, "frontal",
                "--catalog", workdir["catalog"],
                "--config", workdir["config"],
                "--out", out,
            ]
        )
        assert code == 0
        captured = capsys.readouterr()
        assert "single view" in captured.err
        document = json.loads(out.read_text())
        assert document["config"]["backend"].startswith("synthetic:")
        assert document["study_id"] == sick
        ranked = sorted(
            (p for p in document["pathologies"] if p["name"] != "No Finding"),
            key=lambda p: -p["probability"],
        )
        assert ranked[0]["name"] == "Pneumonia"
        descriptors = ranked[0]["descriptors"]
        probs = [d["probability"] for d in descriptors]
        assert probs == sorted(probs, reverse=True)

    def test_multi_view_summary_names_mode(self, workdir, tmp_path, capsys):
        fixture = workdir["fixture"]
        study = fixture.study_ids[0]
        code = run_cli(
            [
                "diagnose", study, "frontal", "extra:lateral",
                "--catalog", workdir["catalog"],
                "--config", workdir["config"],
                "--out", tmp_path / "r.json",
            ]
        )
        assert code == 0
        assert "aggregation: mean" in capsys.readouterr().err

    def test_missing_catalog_exits_2(self, workdir, capsys):
        code = run_cli(
            [
                "diagnose", "s", "v",
                "--catalog", "does-not-exist.json",
                "--backend", "synthetic:1",
            ]
        )
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestEvaluate:
    def test_planted_dataset_macro(self, workdir, tmp_path):
        out = tmp_path / "eval.json"
        code = run_cli(
            [
                "evaluate",
                "--labels", workdir["labels"],
                "--catalog", workdir["catalog"],
                "--config", workdir["config"],
                "--out", out,
            ]
        )
        assert code == 0
        document = json.loads(out.read_text())
        assert document["macro_auroc"] >= 0.95
        assert document["config"]["style"] == "report-style"

    def test_missing_labels_file_exits_2(self, workdir):
        code = run_cli(
            [
                "evaluate",
                "--labels", "nope.csv",
                "--catalog", workdir["catalog"],
                "--config", workdir["config"],
            ]
        )
        assert code == 2

    def test_one_class_pathology_marked_unevaluated(self, workdir, tmp_path):
        labels = tmp_path / "oneclass.csv"
        fixture = workdir["fixture"]
        positives = [s for s in fixture.study_ids if fixture.labels[s]["Pneumonia"] == 1][:3]
        negatives = [s for s in fixture.study_ids if fixture.labels[s]["Pneumonia"] == 0][:3]
        rows = ["Path,Pneumonia,Edema"]
        for study in positives + negatives:
            pneumonia = fixture.labels[study]["Pneumonia"]
            rows.append(f"{study}/frontal,{pneumonia},1")  # Edema stays single-class
        labels.write_text("\n".join(rows) + "\n", encoding="utf-8")
        out = tmp_path / "eval.json"
        code = run_cli(
            [
                "evaluate",
                "--labels", labels,
                "--catalog", workdir["catalog"],
                "--config", workdir["config"],
                "--out", out,
            ]
        )
        assert code == 0
        document = json.loads(out.read_text())
        edema = next(p for p in document["pathologies"] if p["name"] == "Edema")
        assert edema["evaluated"] is False
        assert edema["auroc"] is None


class TestAblate:
    def test_duplicate_styles_deduplicated_with_warning(self, workdir, tmp_path):
        out = tmp_path / "ablate.json"
        with pytest.warns(UserWarning, match="duplicate style"):
            code = run_cli(
                [
                    "ablate",
                    "--labels", workdir["labels"],
                    "--catalog", workdir["catalog"],
                    "--config", workdir["config"],
                    "--styles", "basic,basic,contrastive",
                    "--out", out,
                ]
            )
        assert code == 0
        document = json.loads(out.read_text())
        # two unique styles, default mode mean
        assert len(document["runs"]) == 2
        assert all(run["metadata"]["mode"] == "mean" for run in document["runs"])

    def test_contrastive_at_least_basic(self, workdir, tmp_path):
        out = tmp_path / "ablate.json"
        code = run_cli(
            [
                "ablate",
                "--labels", workdir["labels"],
                "--catalog", workdir["catalog"],
                "--config", workdir["config"],
                "--styles", "basic,contrastive",
                "--modes", "mean",
                "--out", out,
            ]
        )
        assert code == 0
        runs = json.loads(out.read_text())["runs"]
        by_style = {run["metadata"]["style"]: run["macro_auroc"] for run in runs}
        assert by_style["contrastive"] >= by_style["basic"]


class TestNaiveBayesCommands:
    def test_train_eval_round_trip_and_determinism(self, workdir, tmp_path):
        model_a = tmp_path / "model_a.json"
        model_b = tmp_path / "model_b.json"
        for model_path in (model_a, model_b):
            code = run_cli(
                [
                    "nb-train",
                    "--labels", workdir["nb_train"],
                    "--catalog", workdir["nb_catalog"],
                    "--config", workdir["nb_config"],
                    "--model-out", model_path,
                ]
            )
            assert code == 0
        assert model_a.read_bytes() == model_b.read_bytes()

        out = tmp_path / "nb_eval.json"
        code = run_cli(
            [
                "nb-eval",
                "--labels", workdir["nb_eval"],
                "--catalog", workdir["nb_catalog"],
                "--config", workdir["nb_config"],
                "--model", model_a,
                "--out", out,
            ]
        )
        assert code == 0
        document = json.loads(out.read_text())
        assert document["macro_auroc"] == 1.0  # held-out separable fixture

    def test_fingerprint_mismatch_exits_3(self, workdir, tmp_path):
        model = tmp_path / "model.json"
        assert run_cli(
            [
                "nb-train",
                "--labels", workdir["nb_train"],
                "--catalog", workdir["nb_catalog"],
                "--config", workdir["nb_config"],
                "--model-out", model,
            ]
        ) == 0
        code = run_cli(
            [
                "nb-eval",
                "--labels", workdir["labels"],
                "--catalog", workdir["catalog"],  # different catalog than training
                "--config", workdir["config"],
                "--model", model,
            ]
        )
        assert code == 3


class TestCache:
    def test_plan_round_trips_through_store_backend(self, workdir, tmp_path):
        store_path = tmp_path / "prompts.xple"
        code = run_cli(
            [
                "cache", "--plan",
                "--catalog", workdir["nb_catalog"],
                "--config", workdir["nb_config"],
                "--out", store_path,
            ]
        )
        assert code == 0
        with open_store(store_path) as store:
            assert len(store) == 4  # 2 descriptors x positive/negative
            assert store.dimension == 256

    def test_images_and_prompts_files(self, workdir, tmp_path):
        prompts = tmp_path / "prompts.txt"
        prompts.write_text("hello world\n\nsecond prompt\n", encoding="utf-8")
        images = tmp_path / "images.txt"
        images.write_text("study1/frontal\nstudy2/lateral\n", encoding="utf-8")
        store_path = tmp_path / "mixed.xple"
        code = run_cli(
            [
                "cache",
                "--prompts", prompts,
                "--images", images,
                "--catalog", workdir["nb_catalog"],
                "--backend", "synthetic:5",
                "--out", store_path,
            ]
        )
        assert code == 0
        with open_store(store_path) as store:
            assert set(store.keys()) == {
                "hello world", "second prompt", "study1/frontal", "study2/lateral"
            }

    def test_no_sources_writes_valid_empty_store(self, workdir, tmp_path):
        store_path = tmp_path / "empty.xple"
        code = run_cli(
            [
                "cache",
                "--catalog", workdir["nb_catalog"],
                "--backend", "synthetic:5",
                "--out", store_path,
            ]
        )
        assert code == 0
        with open_store(store_path) as store:
            assert len(store) == 0

    def test_unreachable_service_exits_4(self, workdir, tmp_path):
        code = run_cli(
            [
                "cache", "--plan",
                "--catalog", workdir["nb_catalog"],
                "--backend", "http://127.0.0.1:1",
                "--out", tmp_path / "s.xple",
            ]
        )
        assert code == 4


class TestConfigPrecedence:
    def test_flags_beat_config_beat_defaults(self, workdir, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(
            json.dumps(
                {
                    "backend": f"synthetic:{workdir['fixture'].seed}",
                    "style": "basic",
                    "temperature": 0.5,
                    "synthetic": {
                        "dimension": workdir["fixture"].dimension,
                        "planted": workdir["fixture"].planted,
                    },
                }
            ),
            encoding="utf-8",
        )
        out = tmp_path / "report.json"
        study = workdir["fixture"].study_ids[0]
        code = run_cli(
            [
                "diagnose", study, "frontal",
                "--catalog", workdir["catalog"],
                "--config", config,
                "--temperature", "2.0",
                "--out", out,
            ]
        )
        assert code == 0
        echo = json.loads(out.read_text())["config"]
        assert echo["style"] == "basic"  # config beat the default
        assert echo["temperature"] == 2.0  # flag beat the config
        assert echo["mode"] == "mean"  # untouched default

    def test_backend_required(self, workdir, capsys):
        code = run_cli(["diagnose", "s", "v", "--catalog", workdir["catalog"]])
        assert code == 2
        assert "backend" in capsys.readouterr().err

    def test_invalid_temperature_rejected(self, workdir):
        code = run_cli(
            [
                "diagnose", "s", "v",
                "--catalog", workdir["catalog"],
                "--backend", "synthetic:1",
                "--temperature", "-1",
            ]
        )
        assert code == 2
