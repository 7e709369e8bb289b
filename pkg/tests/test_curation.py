import json
from pathlib import Path

import pytest

from trialbox.collector import SelectionCriteria
from trialbox.curation import (
    CurationPipeline,
    ExportCriteria,
    UnknownLicensee,
    filter_clinical_record,
)
from trialbox.dicom import parse_dataset
from trialbox.dicom import tags as T
from trialbox.sim import CorpusSpec


@pytest.fixture
def pipeline(tmp_path, secrets):
    return CurationPipeline(tmp_path / "central", secrets)


@pytest.fixture
def transferred_stack(make_stack):
    """A stack whose studies already sit at the trial endpoint."""
    stack = make_stack(CorpusSpec(n_clients=5, studies_per_client=1, pct_positive=40,
                                  pct_burn_in=20, n_dose_reports=1, seed=19))
    stack.collector.run_collection_cycle(SelectionCriteria())
    stack.collector.transfer_nightly()
    return stack


def test_empty_batch_yields_noop_manifest(pipeline, tmp_path):
    empty = tmp_path / "empty-batch"
    empty.mkdir()
    manifest = pipeline.run_pipeline(empty)
    assert manifest.inputs == []
    assert manifest.outputs == []
    assert all(step["passed"] for step in manifest.step_results.values())


def test_clean_batch_published_with_all_steps(transferred_stack, pipeline):
    manifest = pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    assert len(manifest.inputs) == 5  # the dose report shares its client's directory
    assert manifest.published_at is not None
    assert [manifest.step_results[str(n)]["passed"] for n in range(1, 8)] == [True] * 7
    published = list(pipeline.published_dir.rglob("*.dcm"))
    assert published
    # the dose report was flagged and did not reach publication
    assert manifest.quarantined
    quarantine_reasons = " ".join(q["reason"] for q in manifest.quarantined)
    assert "non-imaging" in quarantine_reasons


def test_dose_report_quarantined_others_published(transferred_stack, pipeline):
    manifest = pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    dose_study = next(s for s in transferred_stack.sim.corpus.studies if s.is_dose_report)
    assert len(manifest.quarantined) == 1
    published_clients = {p.name for p in pipeline.published_dir.iterdir() if p.is_dir()}
    assert len(published_clients) == 5
    for image in pipeline.published_dir.rglob("*.dcm"):
        ds = parse_dataset(image.read_bytes())
        assert ds.text(T.MODALITY) != "SC"
    assert dose_study.study_uid not in {p.name for p in pipeline.published_dir.rglob("*") if p.is_dir()}


def test_stage2_namespace_disjoint_from_stage1(transferred_stack, pipeline):
    pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    stage1 = {p.name for p in transferred_stack.config.endpoint_dir.iterdir() if p.is_dir()}
    stage2 = {p.name for p in pipeline.published_dir.iterdir() if p.is_dir()}
    assert stage1 and stage2
    assert all(name.startswith("S01-") for name in stage1)
    assert all(name.startswith("D-") for name in stage2)
    assert stage1.isdisjoint(stage2)


def test_stage1_and_stage2_uid_sets_disjoint(transferred_stack, pipeline):
    pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    stage1_uids = set()
    for image in transferred_stack.config.endpoint_dir.rglob("*.dcm"):
        ds = parse_dataset(image.read_bytes())
        stage1_uids.update(
            (ds.text(T.STUDY_INSTANCE_UID), ds.text(T.SERIES_INSTANCE_UID), ds.text(T.SOP_INSTANCE_UID))
        )
    stage2_uids = set()
    for image in pipeline.published_dir.rglob("*.dcm"):
        ds = parse_dataset(image.read_bytes())
        stage2_uids.update(
            (ds.text(T.STUDY_INSTANCE_UID), ds.text(T.SERIES_INSTANCE_UID), ds.text(T.SOP_INSTANCE_UID))
        )
    assert stage1_uids and stage2_uids
    assert stage1_uids.isdisjoint(stage2_uids)


def test_second_run_is_stable(transferred_stack, pipeline):
    first = pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    snapshot = {
        str(p.relative_to(pipeline.published_dir)): p.read_bytes()
        for p in pipeline.published_dir.rglob("*.dcm")
    }
    second = pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    assert sorted(second.outputs) == sorted(first.outputs)
    after = {
        str(p.relative_to(pipeline.published_dir)): p.read_bytes()
        for p in pipeline.published_dir.rglob("*.dcm")
    }
    assert snapshot == after


def test_unlinkability_no_stage1_values_in_published(transferred_stack, pipeline):
    pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    stage1_pseudonyms = {p.name for p in transferred_stack.config.endpoint_dir.iterdir() if p.is_dir()}
    stage1_uids = set()
    for image in transferred_stack.config.endpoint_dir.rglob("*.dcm"):
        ds = parse_dataset(image.read_bytes())
        stage1_uids.add(ds.text(T.STUDY_INSTANCE_UID))
    blob = bytearray()
    for path in sorted(pipeline.published_dir.rglob("*")):
        if path.is_file():
            blob += path.read_bytes()
    blob = bytes(blob)
    for value in stage1_pseudonyms | stage1_uids | transferred_stack.sim.corpus.sentinel_strings():
        assert value.encode("utf-8") not in blob


def test_linkage_file_structure(transferred_stack, pipeline):
    pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    rows = pipeline.linkage_rows()
    published_images = list(pipeline.published_dir.rglob("*.dcm"))
    assert len(rows) == len(published_images)
    for row in rows:
        image_path = pipeline.published_dir / row["client_s2"] / row["study_s2"] / f"{row['image_s2']}.dcm"
        assert image_path.exists()
        ds = parse_dataset(image_path.read_bytes())
        assert ds.text(T.SERIES_INSTANCE_UID) == row["series_s2"]
    # forest property: one row per image, image uids unique
    image_ids = [row["image_s2"] for row in rows]
    assert len(image_ids) == len(set(image_ids))


def test_filtered_record_respects_whitelist(transferred_stack, pipeline):
    pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    for record_path in pipeline.published_dir.rglob("clinical.json"):
        payload = json.loads(record_path.read_text())
        assert payload["pseudonym"].startswith("D-")
        assert set(payload) <= {"pseudonym", "episodes"}
        for episode in payload.get("episodes", []):
            assert set(episode) <= {"outcome", "revised_from"}
            assert "outcome_date" not in episode


# -- filter_clinical_record unit behavior -----------------------------------------


def test_filter_empty_whitelist():
    record = {"pseudonym": "S01-1", "episodes": [{"outcome": "normal"}]}
    out = filter_clinical_record(record, set(), "D-9")
    assert out == {"pseudonym": "D-9"}


def test_filter_keeps_only_named_subkeys():
    record = {
        "pseudonym": "S01-1",
        "episodes": [
            {"outcome": "normal", "outcome_date": "2023-01-01", "revised_from": None},
            {"outcome": "biopsy-benign", "outcome_date": "2023-02-02", "revised_from": "normal"},
        ],
    }
    out = filter_clinical_record(record, {"episodes.outcome"}, "D-9")
    assert out["episodes"] == [{"outcome": "normal"}, {"outcome": "biopsy-benign"}]


def test_filter_absent_property_stays_absent():
    out = filter_clinical_record({}, {"episodes.outcome", "demographics_allowed.birth_year"}, "D-9")
    assert out == {"pseudonym": "D-9"}


def test_filter_whole_property_path():
    record = {"demographics_allowed": {"birth_year": 1960, "sex": "F"}}
    out = filter_clinical_record(record, {"demographics_allowed"}, "D-9")
    assert out["demographics_allowed"] == {"birth_year": 1960, "sex": "F"}


# -- scanning -----------------------------------------------------------------------


def test_scan_clean_tree_has_no_findings(transferred_stack, pipeline):
    pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    assert pipeline.scan_published() == []


def test_scan_flags_planted_national_id(pipeline, tmp_path):
    tree = tmp_path / "suspect-tree"
    study = tree / "D-00000001" / "2.1"
    study.mkdir(parents=True)
    (study / "clinical.json").write_text(json.dumps({"note": "id 9999999999 embedded"}))
    findings = pipeline.scan_published(tree)
    assert any(f["kind"] == "national-id-pattern" for f in findings)


def test_scan_ignores_invalid_ten_digit_numbers(pipeline, tmp_path):
    tree = tmp_path / "clean-tree"
    study = tree / "D-00000001" / "2.1"
    study.mkdir(parents=True)
    (study / "clinical.json").write_text(json.dumps({"note": "ref 1234567890"}))
    assert pipeline.scan_published(tree) == []


# -- cascade --------------------------------------------------------------------------


def test_cascade_stage1_removes_published_and_linkage(transferred_stack, pipeline):
    pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    stage1_pseudonym = next(p.name for p in transferred_stack.config.endpoint_dir.iterdir() if p.is_dir())
    stage2_record = pipeline.vault.find_by_local_id(stage1_pseudonym)
    report = pipeline.cascade_stage1(stage1_pseudonym)
    assert report.published_studies_removed >= 1
    assert not (pipeline.published_dir / stage2_record.pseudonym).exists()
    for row in pipeline.linkage_rows():
        assert row["client_s2"] != stage2_record.pseudonym


# -- export -----------------------------------------------------------------------------


def test_export_requires_known_licensee(transferred_stack, pipeline, tmp_path):
    pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    with pytest.raises(UnknownLicensee):
        pipeline.export_subset(ExportCriteria(), tmp_path / "out", "nobody")


def test_export_empty_selection_still_audited(transferred_stack, pipeline, tmp_path):
    pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    pipeline.register_licensee("acme-lab")
    report = pipeline.export_subset(
        ExportCriteria(outcomes={"no-such-outcome"}), tmp_path / "out", "acme-lab"
    )
    assert report.empty is True
    assert report.studies == 0
    rows = pipeline.audit_rows()
    assert len(rows) == 1
    assert rows[0]["licensee"] == "acme-lab"
    assert rows[0]["empty"] is True


def test_export_max_clients_deterministic(transferred_stack, pipeline, tmp_path):
    pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    pipeline.register_licensee("acme-lab")
    report = pipeline.export_subset(ExportCriteria(max_clients=3), tmp_path / "out1", "acme-lab")
    assert report.clients == 3
    report2 = pipeline.export_subset(ExportCriteria(max_clients=3), tmp_path / "out2", "acme-lab")
    files1 = sorted(str(p.relative_to(tmp_path / "out1")) for p in (tmp_path / "out1").rglob("*.dcm"))
    files2 = sorted(str(p.relative_to(tmp_path / "out2")) for p in (tmp_path / "out2").rglob("*.dcm"))
    assert files1 == files2
    assert (tmp_path / "out1" / "linkage.csv").exists()


def test_export_two_licensees_two_audit_rows(transferred_stack, pipeline, tmp_path):
    pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    pipeline.register_licensee("lab-a")
    pipeline.register_licensee("lab-b")
    pipeline.export_subset(ExportCriteria(max_clients=1), tmp_path / "a", "lab-a")
    pipeline.export_subset(ExportCriteria(max_clients=1), tmp_path / "b", "lab-b")
    licensees = [row["licensee"] for row in pipeline.audit_rows()]
    assert licensees == ["lab-a", "lab-b"]
    checksums = [f["sha256"] for row in pipeline.audit_rows() for f in row["files"]]
    assert all(len(c) == 64 for c in checksums)


def test_export_outcome_filter(transferred_stack, pipeline, tmp_path):
    pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    pipeline.register_licensee("acme-lab")
    report = pipeline.export_subset(
        ExportCriteria(outcomes={"biopsy-malignant", "biopsy-benign"}), tmp_path / "pos", "acme-lab"
    )
    assert 0 < report.clients < 5
    for record_path in (tmp_path / "pos").rglob("clinical.json"):
        payload = json.loads(record_path.read_text())
        outcomes = {ep["outcome"] for ep in payload["episodes"]}
        assert outcomes & {"biopsy-malignant", "biopsy-benign"}


def test_export_trees_removed_by_cascade(transferred_stack, pipeline, tmp_path):
    pipeline.run_pipeline(transferred_stack.config.endpoint_dir)
    pipeline.register_licensee("acme-lab")
    dest = tmp_path / "licensed"
    pipeline.export_subset(ExportCriteria(), dest, "acme-lab")
    exported_clients = [p.name for p in dest.iterdir() if p.is_dir()]
    assert exported_clients
    stage2 = exported_clients[0]
    # walk back to the stage-1 pseudonym through the vault
    stage1 = None
    for p in transferred_stack.config.endpoint_dir.iterdir():
        record = pipeline.vault.find_by_local_id(p.name)
        if record and record.pseudonym == stage2:
            stage1 = p.name
    assert stage1 is not None
    pipeline.cascade_stage1(stage1)
    assert not (dest / stage2).exists()