import io
import zipfile
from types import SimpleNamespace

import pytest
from fastapi.testclient import TestClient

from trialbox.adminapi import UserStore, create_app
from trialbox.collector import SelectionCriteria
from trialbox.sim import CorpusSpec

ADMIN_PASS = "admin-pass-123"
UPLOAD_PASS = "upload-pass-123"

UAT07_CSV = """Primary ID,Secondary ID,Trial Code,Date Enrolled
1111111111,Test1,UAT-TESTING-02,
2222222222,Test2,UAT-TESTING-03,2043-33-44
,Test3,UAT-TESTING-04,
1234567890,Test4,UAT-TESTING-05,
This is not a number,Test5,UAT-TESTING-06,
3333333333,Test6,,
"""

UAT07_FIXED_CSV = """Primary ID,Secondary ID,Trial Code,Date Enrolled
1111111111,Test1,UAT-TESTING-02,
"""


@pytest.fixture
def api(make_stack, tmp_path):
    stack = make_stack(CorpusSpec(n_clients=3, studies_per_client=1, pct_burn_in=0, seed=37))
    users = UserStore(tmp_path / "users.json")
    users.ensure_user("admin", ADMIN_PASS, role="admin")
    users.ensure_user("uploader", UPLOAD_PASS, role="uploader")
    app = create_app(stack.collector, users)
    client = TestClient(app)
    return SimpleNamespace(stack=stack, client=client, users=users)


def _login(api, username="admin", password=ADMIN_PASS) -> dict:
    response = api.client.post("/api/login", json={"username": username, "password": password})
    assert response.status_code == 200, response.text
    return {"X-Session-Token": response.json()["token"]}


# -- UAT Test 03: login ---------------------------------------------------------


def test_login_with_provided_account(api):
    headers = _login(api)
    assert api.client.get("/api/health", headers=headers).status_code == 200


def test_login_rejects_bad_password(api):
    response = api.client.post("/api/login", json={"username": "admin", "password": "wrong"})
    assert response.status_code == 401


# -- UAT Test 04: change password --------------------------------------------------


def test_change_password_steps(api):
    headers = _login(api)
    # invalid current + blank new
    r = api.client.post(
        "/api/change-password",
        json={"current_password": "nope", "new_password": ""},
        headers=headers,
    )
    assert r.status_code in (400, 401)
    # invalid current + short new
    r = api.client.post(
        "/api/change-password",
        json={"current_password": "nope", "new_password": "short"},
        headers=headers,
    )
    assert r.status_code in (400, 401)
    # invalid current + valid-length new still fails
    r = api.client.post(
        "/api/change-password",
        json={"current_password": "nope", "new_password": "long-enough-pass"},
        headers=headers,
    )
    assert r.status_code == 401
    # valid current + short new fails with weak-password
    r = api.client.post(
        "/api/change-password",
        json={"current_password": ADMIN_PASS, "new_password": "short"},
        headers=headers,
    )
    assert r.status_code == 400
    # valid current + valid new succeeds
    r = api.client.post(
        "/api/change-password",
        json={"current_password": ADMIN_PASS, "new_password": "new-pass-456"},
        headers=headers,
    )
    assert r.status_code == 200
    # log out and back in with the new password
    api.client.post("/api/logout", headers=headers)
    assert api.client.post(
        "/api/login", json={"username": "admin", "password": ADMIN_PASS}
    ).status_code == 401
    assert api.client.post(
        "/api/login", json={"username": "admin", "password": "new-pass-456"}
    ).status_code == 200


# -- UAT Test 05: logout -------------------------------------------------------------


def test_logout_blocks_restricted_pages(api):
    headers = _login(api)
    assert api.client.post(
        "/api/register-client",
        json={"primary_id": "9999999999", "secondary_id": "H1", "trial_code": "T-1"},
        headers=headers,
    ).status_code == 200
    assert api.client.post("/api/logout", headers=headers).status_code == 200
    response = api.client.post(
        "/api/register-client",
        json={"primary_id": "8888888888", "secondary_id": "H2", "trial_code": "T-2"},
        headers=headers,
    )
    assert response.status_code == 401


# -- UAT Test 06: register client ------------------------------------------------------


def test_register_client_validation_sequence(api):
    headers = _login(api)

    def register(primary, trial_code="", date_enrolled=None):
        body = {"primary_id": primary, "secondary_id": "H-TEST", "trial_code": trial_code}
        if date_enrolled is not None:
            body["date_enrolled"] = date_enrolled
        return api.client.post("/api/register-client", json=body, headers=headers)

    # random text in the primary id
    r = register("abc123!!", "UAT-TESTING-01")
    assert r.status_code == 400 and r.json()["error"] == "invalid-national-id"
    # plausible but invalid number
    r = register("1234567890", "UAT-TESTING-01")
    assert r.status_code == 400 and r.json()["error"] == "invalid-national-id"
    # valid number but no trial code
    r = register("9999999999")
    assert r.status_code == 400 and r.json()["error"] == "missing-trial-code"
    # valid number + trial code succeeds
    r = register("9999999999", "UAT-TESTING-01")
    assert r.status_code == 200
    assert r.json()["pseudonym"].startswith("S01-")
    # second client reusing the trial code
    r = register("8888888888", "UAT-TESTING-01")
    assert r.status_code == 400 and r.json()["error"] == "duplicate-trial-code"
    # same client again under a new trial code
    r = register("9999999999", "UAT-TESTING-02")
    assert r.status_code == 400 and r.json()["error"] == "already-registered"
    # optional enrolment date: random text rejected, valid date accepted
    r = register("5990128088", "UAT-TESTING-03", date_enrolled="not a date")
    assert r.status_code == 400 and r.json()["error"] == "invalid-date"
    r = register("5990128088", "UAT-TESTING-03", date_enrolled="2026-01-15")
    assert r.status_code == 200


# -- UAT Test 07: batch registration ----------------------------------------------------


def test_batch_upload_uat_fixture_errors_rows_3_to_7(api):
    headers = _login(api)
    before = len(api.stack.collector.vault.all_records())
    response = api.client.post(
        "/api/batch-upload",
        content=UAT07_CSV,
        headers={**headers, "Content-Type": "text/csv"},
    )
    assert response.status_code == 400
    errors = response.json()["errors"]
    assert [e["row_number"] for e in errors] == [3, 4, 5, 6, 7]
    reasons = {e["row_number"]: e["reason"] for e in errors}
    assert reasons[3] == "invalid-date"
    assert reasons[4] == "missing-primary-id"
    assert reasons[5] == "invalid-national-id"
    assert reasons[6] == "invalid-national-id"
    assert reasons[7] == "missing-trial-code"
    # all-or-nothing: vault unchanged
    assert len(api.stack.collector.vault.all_records()) == before


def test_batch_upload_fixed_fixture_registers_one(api):
    headers = _login(api)
    response = api.client.post(
        "/api/batch-upload",
        content=UAT07_FIXED_CSV,
        headers={**headers, "Content-Type": "text/csv"},
    )
    assert response.status_code == 200
    assert response.json() == {"accepted": 1}
    assert api.stack.collector.vault.find_by_national_id("1111111111") is not None


def test_batch_upload_empty_rows(api):
    headers = _login(api)
    response = api.client.post(
        "/api/batch-upload",
        content="Primary ID,Secondary ID,Trial Code,Date Enrolled\n",
        headers={**headers, "Content-Type": "text/csv"},
    )
    assert response.status_code == 200
    assert response.json() == {"accepted": 0}


def test_batch_upload_duplicate_within_batch(api):
    headers = _login(api)
    csv_text = (
        "Primary ID,Secondary ID,Trial Code,Date Enrolled\n"
        "1111111111,Test1,CODE-1,\n"
        "3333333333,Test2,CODE-1,\n"
    )
    response = api.client.post(
        "/api/batch-upload", content=csv_text, headers={**headers, "Content-Type": "text/csv"}
    )
    assert response.status_code == 400
    assert response.json()["errors"] == [{"row_number": 3, "reason": "duplicate-trial-code"}]


# -- UAT Test 09: check clients ------------------------------------------------------------


def test_check_clients_uat_sequence(api):
    headers = _login(api)
    api.client.post(
        "/api/register-client",
        json={"primary_id": "9999999999", "secondary_id": "H-UAT", "trial_code": "UAT-TESTING-01"},
        headers=headers,
    )
    terms = ["1111111111", "3333333333", "THIS_IS_NOT_A_NUMBER", "9999999999"]
    response = api.client.post("/api/check-clients", json={"terms": terms}, headers=headers)
    rows = response.json()["rows"]
    assert [r["term"] for r in rows] == terms
    by_term = {r["term"]: r for r in rows}
    assert by_term["9999999999"]["registered"] is True
    assert by_term["1111111111"]["registered"] is False
    assert by_term["THIS_IS_NOT_A_NUMBER"]["registered"] is False


def test_check_clients_matches_secondary_id(api):
    headers = _login(api)
    api.client.post(
        "/api/register-client",
        json={"primary_id": "9999999999", "secondary_id": "HOSP-77", "trial_code": "T-77"},
        headers=headers,
    )
    response = api.client.post("/api/check-clients", json={"terms": ["HOSP-77"]}, headers=headers)
    assert response.json()["rows"][0]["registered"] is True


def test_check_clients_empty_terms(api):
    headers = _login(api)
    response = api.client.post("/api/check-clients", json={"terms": []}, headers=headers)
    assert response.json()["rows"] == []


def test_check_clients_csv_download(api):
    headers = _login(api)
    response = api.client.post(
        "/api/check-clients.csv", json={"terms": ["9999999999"]}, headers=headers
    )
    assert response.status_code == 200
    assert response.headers["content-type"].startswith("text/csv")
    assert "attachment" in response.headers["content-disposition"]
    assert response.text.splitlines()[0] == "term,registered,status"


# -- UAT Test 08: download data ----------------------------------------------------------------


def test_download_data_empty_database_has_all_tabs(api):
    headers = _login(api)
    response = api.client.get("/api/download-data", headers=headers)
    assert response.status_code == 200
    archive = zipfile.ZipFile(io.BytesIO(response.content))
    assert sorted(archive.namelist()) == ["clients.csv", "images.csv", "overview.csv", "studies.csv"]
    clients_csv = archive.read("clients.csv").decode().splitlines()
    assert clients_csv[0] == "pseudonym,trial_code,collection_state"
    assert len(clients_csv) == 1  # headers only


def test_download_data_after_collection_lists_images(api):
    api.stack.collector.run_collection_cycle(SelectionCriteria())
    headers = _login(api)
    response = api.client.get("/api/download-data?format=json", headers=headers)
    tables = response.json()["tables"]
    staged_images = sum(
        len(case.get("images", [])) for case in api.stack.collector.state.cases().values()
    )
    assert staged_images > 0
    assert len(tables["images"]["rows"]) == staged_images
    assert len(tables["studies"]["rows"]) == len(api.stack.collector.state.cases())


def test_download_data_single_section(api):
    headers = _login(api)
    response = api.client.get("/api/download-data?sections=clients", headers=headers)
    archive = zipfile.ZipFile(io.BytesIO(response.content))
    assert archive.namelist() == ["clients.csv"]


def test_download_data_contains_no_raw_identifiers(api):
    api.stack.collector.run_collection_cycle(SelectionCriteria())
    headers = _login(api)
    response = api.client.get("/api/download-data", headers=headers)
    blob = response.content
    archive = zipfile.ZipFile(io.BytesIO(blob))
    text = b"".join(archive.read(n) for n in archive.namelist())
    for study in api.stack.sim.corpus.studies:
        assert study.national_id.encode() not in text
        assert study.local_id.encode() not in text


# -- opt-out endpoint ----------------------------------------------------------------------------


def test_opt_out_unknown_client_reports_zeros(api):
    headers = _login(api)
    response = api.client.post("/api/opt-out", json={"national_id": "9999999999"}, headers=headers)
    assert response.status_code == 200
    assert response.json()["cascade"]["staged_studies_removed"] == 0


def test_opt_out_requires_admin_role(api):
    headers = _login(api, "uploader", UPLOAD_PASS)
    response = api.client.post("/api/opt-out", json={"national_id": "9999999999"}, headers=headers)
    assert response.status_code == 403


def test_opt_out_collected_client_removes_files(api):
    api.stack.collector.run_collection_cycle(SelectionCriteria())
    headers = _login(api)
    victim = api.stack.sim.corpus.studies[0]
    pseudonym = api.stack.collector.vault.find_by_national_id(victim.national_id).pseudonym
    response = api.client.post(
        "/api/opt-out", json={"national_id": victim.national_id}, headers=headers
    )
    assert response.json()["cascade"]["staged_studies_removed"] == 1
    assert not (api.stack.config.work_dir / "staging" / pseudonym).exists()
    # repeat is an idempotent zero-delta report
    again = api.client.post(
        "/api/opt-out", json={"national_id": victim.national_id}, headers=headers
    )
    assert again.json()["cascade"]["staged_studies_removed"] == 0


def test_opt_out_invalid_id(api):
    headers = _login(api)
    response = api.client.post("/api/opt-out", json={"national_id": "badid"}, headers=headers)
    assert response.status_code == 400


# -- authorization sweep and health ------------------------------------------------------------------


RESTRICTED_CALLS = [
    ("POST", "/api/logout", {"json": {}}),
    ("POST", "/api/change-password", {"json": {"current_password": "a", "new_password": "b" * 8}}),
    ("POST", "/api/register-client", {"json": {"primary_id": "9999999999", "secondary_id": "", "trial_code": "T"}}),
    ("POST", "/api/batch-upload", {"content": UAT07_FIXED_CSV}),
    ("POST", "/api/check-clients", {"json": {"terms": ["x"]}}),
    ("POST", "/api/check-clients.csv", {"json": {"terms": ["x"]}}),
    ("GET", "/api/download-data", {}),
    ("POST", "/api/opt-out", {"json": {"national_id": "9999999999"}}),
    ("GET", "/api/health", {}),
]


@pytest.mark.parametrize("method,path,kwargs", RESTRICTED_CALLS)
def test_every_endpoint_requires_session(api, method, path, kwargs):
    response = api.client.request(method, path, **kwargs)
    assert response.status_code == 401


def test_stale_token_rejected(api):
    response = api.client.get("/api/health", headers={"X-Session-Token": "bogus"})
    assert response.status_code == 401


def test_health_reports_version_disk_and_cycle(api):
    api.stack.collector.run_collection_cycle(SelectionCriteria())
    headers = _login(api)
    payload = api.client.get("/api/health", headers=headers).json()
    assert payload["version"]
    assert payload["disk_free_bytes"] > 0
    assert payload["last_cycle_at"] is not None
    assert payload["cases_by_status"].get("staged", 0) >= 1
