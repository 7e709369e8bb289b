"""HTTP service behind the operator portal.

JSON in and out, with CSV upload for batch registration and zipped CSV
downloads for the data export. Every endpoint except login requires a
valid session token; opt-out additionally requires the admin role.
"""

from __future__ import annotations

import csv
import io
import json
import shutil
import zipfile
from datetime import date

from fastapi import Depends, FastAPI, Header, HTTPException, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .. import __version__
from ..collector.service import Collector
from ..nhs import validate_national_id
from ..vault import (
    AlreadyRegistered,
    DuplicateTrialCode,
    InvalidNationalId,
    MissingTrialCode,
    OptedOut,
)
from .auth import BadCredentials, InvalidSession, SessionStore, UserAccount, UserStore, WeakPassword

BATCH_COLUMNS = ["Primary ID", "Secondary ID", "Trial Code", "Date Enrolled"]
DOWNLOAD_SECTIONS = ("overview", "clients", "studies", "images")


class LoginBody(BaseModel):
    username: str
    password: str


class ChangePasswordBody(BaseModel):
    current_password: str
    new_password: str


class RegisterBody(BaseModel):
    primary_id: str
    secondary_id: str = ""
    trial_code: str = ""
    date_enrolled: str | None = None


class CheckClientsBody(BaseModel):
    terms: list[str]


class OptOutBody(BaseModel):
    national_id: str


def create_app(
    collector: Collector,
    users: UserStore,
    curation=None,
    sessions: SessionStore | None = None,
    static_dir=None,
) -> FastAPI:
    app = FastAPI(title="collection portal api", version=__version__)
    sessions = sessions or SessionStore()

    def current_user(x_session_token: str | None = Header(default=None)) -> UserAccount:
        try:
            return sessions.resolve(x_session_token)
        except InvalidSession as exc:
            raise HTTPException(status_code=401, detail=str(exc))

    def admin_user(user: UserAccount = Depends(current_user)) -> UserAccount:
        if user.role != "admin":
            raise HTTPException(status_code=403, detail="admin role required")
        return user

    # -- auth ---------------------------------------------------------

    @app.post("/api/login")
    def login(body: LoginBody):
        try:
            account = users.verify(body.username, body.password)
        except BadCredentials as exc:
            raise HTTPException(status_code=401, detail=str(exc))
        token = sessions.create(account)
        return {"token": token, "role": account.role, "username": account.username}

    @app.post("/api/logout")
    def logout(user: UserAccount = Depends(current_user),
               x_session_token: str | None = Header(default=None)):
        sessions.destroy(x_session_token)
        return {"ok": True}

    @app.post("/api/change-password")
    def change_password(body: ChangePasswordBody, user: UserAccount = Depends(current_user)):
        try:
            users.change_password(user.username, body.current_password, body.new_password)
        except BadCredentials:
            raise HTTPException(status_code=401, detail="current password is incorrect")
        except WeakPassword as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"ok": True}

    # -- registration ----------------------------------------------------

    @app.post("/api/register-client")
    def register_client(body: RegisterBody, user: UserAccount = Depends(current_user)):
        verdict = validate_national_id(body.primary_id)
        if not verdict:
            return _error(400, "invalid-national-id", f"the NHS number is invalid ({verdict.reason})")
        if body.date_enrolled:
            try:
                date.fromisoformat(body.date_enrolled)
            except ValueError:
                return _error(400, "invalid-date", "date enrolled must be a valid YYYY-MM-DD date")
        try:
            record = collector.vault.register_client(
                body.primary_id, body.secondary_id, body.trial_code.strip()
            )
        except MissingTrialCode:
            return _error(400, "missing-trial-code", "a trial code has not been provided")
        except DuplicateTrialCode:
            return _error(400, "duplicate-trial-code", "no two clients can have the same trial code")
        except AlreadyRegistered:
            return _error(400, "already-registered", "this client has already been registered")
        except OptedOut:
            return _error(400, "opted-out", "this client has opted out of collection")
        except InvalidNationalId as exc:
            return _error(400, "invalid-national-id", str(exc))
        collector.state.upsert_client(
            record.pseudonym,
            local_id=body.secondary_id,
            date_enrolled=body.date_enrolled,
        )
        return {"ok": True, "pseudonym": record.pseudonym, "trial_code": record.trial_code}

    # -- batch upload ------------------------------------------------------

    @app.post("/api/batch-upload")
    async def batch_upload(request: Request, user: UserAccount = Depends(current_user)):
        raw = await request.body()
        try:
            text = raw.decode("utf-8-sig")
        except UnicodeDecodeError:
            return _error(400, "bad-encoding", "batch file must be UTF-8 CSV")
        rows = _parse_batch_csv(text)
        errors = _validate_batch(rows, collector)
        if errors:
            return JSONResponse(status_code=400, content={"errors": errors})
        for row in rows:
            record = collector.vault.register_client(
                row["primary_id"], row["secondary_id"], row["trial_code"]
            )
            collector.state.upsert_client(
                record.pseudonym,
                local_id=row["secondary_id"],
                date_enrolled=row["date_enrolled"] or None,
            )
        return {"accepted": len(rows)}

    # -- queries -------------------------------------------------------------

    @app.post("/api/check-clients")
    def check_clients(body: CheckClientsBody, user: UserAccount = Depends(current_user)):
        return {"rows": [_check_one(term, collector) for term in body.terms]}

    @app.post("/api/check-clients.csv")
    def check_clients_csv(body: CheckClientsBody, user: UserAccount = Depends(current_user)):
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["term", "registered", "status"])
        for term in body.terms:
            row = _check_one(term, collector)
            writer.writerow([row["term"], "yes" if row["registered"] else "no", row["status"]])
        return Response(
            content=buf.getvalue(),
            media_type="text/csv",
            headers={"Content-Disposition": "attachment; filename=check-clients.csv"},
        )

    @app.get("/api/download-data")
    def download_data(
        sections: str = ",".join(DOWNLOAD_SECTIONS),
        format: str = "zip",
        user: UserAccount = Depends(current_user),
    ):
        wanted = [s.strip() for s in sections.split(",") if s.strip()]
        unknown = [s for s in wanted if s not in DOWNLOAD_SECTIONS]
        if unknown:
            return _error(400, "unknown-section", f"unknown sections: {', '.join(unknown)}")
        tables = {name: _build_table(name, collector) for name in wanted}
        if format == "json":
            return {"tables": tables}
        buf = io.BytesIO()
        with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
            for name, table in tables.items():
                out = io.StringIO()
                writer = csv.writer(out)
                writer.writerow(table["columns"])
                writer.writerows(table["rows"])
                zf.writestr(f"{name}.csv", out.getvalue())
        return Response(
            content=buf.getvalue(),
            media_type="application/zip",
            headers={"Content-Disposition": "attachment; filename=collection-data.zip"},
        )

    # -- opt-out ----------------------------------------------------------------

    @app.post("/api/opt-out")
    def opt_out(body: OptOutBody, user: UserAccount = Depends(admin_user)):
        verdict = validate_national_id(body.national_id)
        if not verdict:
            return _error(400, "invalid-national-id", f"the NHS number is invalid ({verdict.reason})")
        record = collector.vault.find_by_national_id(body.national_id)
        entry = collector.opt_out(body.national_id)
        report = entry.cascade_report.as_dict() if entry.cascade_report else {
            "vault_rows_removed": 0,
            "staged_studies_removed": 0,
            "published_studies_removed": 0,
        }
        if record is not None and curation is not None:
            stage2 = curation.cascade_stage1(record.pseudonym)
            report["published_studies_removed"] += stage2.published_studies_removed
            report["vault_rows_removed"] += stage2.vault_rows_removed
        return {"ok": True, "cascade": report}

    # -- monitoring ----------------------------------------------------------------

    @app.get("/api/health")
    def health(user: UserAccount = Depends(current_user)):
        usage = shutil.disk_usage(collector.work_dir)
        summary = collector.status_summary()
        return {
            "version": __version__,
            "disk_free_bytes": usage.free,
            "disk_total_bytes": usage.total,
            "last_cycle_at": summary["last_cycle_at"],
            "cases": summary["cases"],
            "cases_by_status": summary["by_status"],
            "clients": summary["clients"],
        }

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="portal")

    return app


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "message": message})


def _parse_batch_csv(text: str) -> list[dict]:
    reader = csv.reader(io.StringIO(text))
    rows = []
    for i, parts in enumerate(reader):
        if i == 0:
            continue  # header is spreadsheet row 1
        if not any(cell.strip() for cell in parts):
            continue
        parts = list(parts) + [""] * (4 - len(parts))
        rows.append(
            {
                "row_number": i + 1,
                "primary_id": parts[0].strip(),
                "secondary_id": parts[1].strip(),
                "trial_code": parts[2].strip(),
                "date_enrolled": parts[3].strip(),
            }
        )
    return rows


def _validate_batch(rows: list[dict], collector: Collector) -> list[dict]:
    errors = []
    seen_trial_codes: dict[str, int] = {}
    seen_primaries: dict[str, int] = {}
    for row in rows:
        n = row["row_number"]
        if not row["primary_id"]:
            errors.append({"row_number": n, "reason": "missing-primary-id"})
            continue
        verdict = validate_national_id(row["primary_id"])
        if not verdict:
            errors.append({"row_number": n, "reason": "invalid-national-id"})
            continue
        if row["date_enrolled"]:
            try:
                date.fromisoformat(row["date_enrolled"])
            except ValueError:
                errors.append({"row_number": n, "reason": "invalid-date"})
                continue
        if not row["trial_code"]:
            errors.append({"row_number": n, "reason": "missing-trial-code"})
            continue
        if row["trial_code"] in seen_trial_codes:
            errors.append({"row_number": n, "reason": "duplicate-trial-code"})
            continue
        seen_trial_codes[row["trial_code"]] = n
        if row["primary_id"] in seen_primaries:
            errors.append({"row_number": n, "reason": "duplicate-primary-id"})
            continue
        seen_primaries[row["primary_id"]] = n
        existing = collector.vault.find_by_national_id(row["primary_id"])
        if existing is not None and existing.trial_code != row["trial_code"]:
            errors.append({"row_number": n, "reason": "already-registered"})
            continue
        if collector.vault.is_opted_out(row["primary_id"]):
            errors.append({"row_number": n, "reason": "opted-out"})
            continue
        holder = next(
            (r for r in collector.vault.all_records() if r.trial_code == row["trial_code"]),
            None,
        )
        if holder is not None and (existing is None or holder.pseudonym != existing.pseudonym):
            errors.append({"row_number": n, "reason": "duplicate-trial-code"})
    return errors


def _check_one(term: str, collector: Collector) -> dict:
    record = collector.vault.find_by_national_id(term) or collector.vault.find_by_local_id(term)
    if record is None:
        return {"term": term, "registered": False, "status": "not-registered"}
    statuses = [
        case.get("status")
        for case in collector.state.cases().values()
        if case.get("pseudonym") == record.pseudonym
    ]
    if not statuses:
        status = "registered, no images collected"
    else:
        staged = sum(1 for s in statuses if s == "staged")
        transferred = sum(1 for s in statuses if s == "transferred")
        status = f"registered, {staged} staged, {transferred} transferred"
    return {
        "term": term,
        "registered": True,
        "pseudonym": record.pseudonym,
        "status": status,
    }


def _build_table(name: str, collector: Collector) -> dict:
    records = collector.vault.all_records()
    cases = collector.state.cases()
    if name == "overview":
        by_status: dict[str, int] = {}
        for case in cases.values():
            by_status[case.get("status", "unknown")] = by_status.get(case.get("status", "unknown"), 0) + 1
        rows = [["clients", len(records)], ["studies", len(cases)]]
        rows += [[f"studies_{status}", count] for status, count in sorted(by_status.items())]
        return {"columns": ["metric", "value"], "rows": rows}
    if name == "clients":
        collected = {case.get("pseudonym") for case in cases.values() if case.get("status") in ("staged", "transferred")}
        return {
            "columns": ["pseudonym", "trial_code", "collection_state"],
            "rows": [
                [r.pseudonym, r.trial_code, "collected" if r.pseudonym in collected else "registered"]
                for r in sorted(records, key=lambda r: r.pseudonym)
            ],
        }
    if name == "studies":
        return {
            "columns": ["pseudonym", "study_uid", "status", "image_count"],
            "rows": [
                [
                    case.get("pseudonym", ""),
                    case.get("remapped_study_uid", ""),
                    case.get("status", ""),
                    len(case.get("images", [])),
                ]
                for _, case in sorted(cases.items())
            ],
        }
    if name == "images":
        rows = []
        for _, case in sorted(cases.items()):
            for image_uid in case.get("images", []):
                rows.append(
                    [case.get("pseudonym", ""), case.get("remapped_study_uid", ""), image_uid,
                     case.get("status", "")]
                )
        return {"columns": ["pseudonym", "study_uid", "image_uid", "status"], "rows": rows}
    raise ValueError(f"unknown section {name}")
