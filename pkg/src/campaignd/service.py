"""The orchestration core: campaigns, volunteers, measurements, counters.

One Service owns all state and an append-only JSONL event log. Every write
path validates, then applies a log event through the same code replay uses,
so a restart rebuilds byte-identical state. Mutations serialize per campaign;
registry and volunteer state sit behind one global lock.
"""
from __future__ import annotations

import json
import secrets
import threading
from pathlib import Path
from typing import Callable, Optional

from . import campaign as cmod
from . import coverage, geo, guidance, store
from .errors import (
    CampaignCompleted,
    CampaignError,
    CorruptLog,
    DuplicatePluginId,
    IllegalTransition,
    InvalidCoordinates,
    MalformedRequest,
    MissingSensorPlugin,
    NoRegions,
    UnknownCampaign,
    UnknownRegion,
    UnknownVolunteer,
)
from .timeutil import format_rfc3339, now_ms

LOG_NAME = "events.jsonl"


class EventLog:
    """Append-only JSONL with strictly increasing seq, replayed on startup."""

    def __init__(self, path: Optional[Path]):
        self.path = path
        self.seq = 0
        self._fh = None
        self._lock = threading.Lock()

    def open_for_append(self) -> None:
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "a", encoding="utf-8")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def append(self, event: dict) -> int:
        with self._lock:
            self.seq += 1
            record = {"seq": self.seq}
            record.update(event)
            if self._fh is not None:
                self._fh.write(json.dumps(record, separators=(",", ":")) + "\n")
                self._fh.flush()
            return self.seq

    @staticmethod
    def read_events(path: Path):
        """Yield events in order; raise CorruptLog naming the last good seq."""
        with open(path, "rb") as fh:
            data = fh.read()
        last = 0
        if not data:
            return
        if not data.endswith(b"\n"):
            # every append ends with a newline; a missing one is a torn write,
            # but the complete lines before it are still trustworthy
            nl = data.rfind(b"\n")
            torn = data[nl + 1:]
            data = data[:nl + 1] if nl >= 0 else b""
            for event in EventLog._parse_lines(data):
                last = event["seq"]
                yield event
            raise CorruptLog(last, f"torn trailing record: {torn[:80]!r}")
        yield from EventLog._parse_lines(data)

    @staticmethod
    def _parse_lines(data: bytes):
        last = 0
        for lineno, line in enumerate(data.split(b"\n")[:-1], start=1):
            try:
                event = json.loads(line)
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise CorruptLog(last, f"line {lineno} unparseable: {exc}") from exc
            if not isinstance(event, dict) or not isinstance(event.get("seq"), int):
                raise CorruptLog(last, f"line {lineno} has no integer seq")
            if event["seq"] != last + 1:
                raise CorruptLog(last, f"line {lineno} seq {event['seq']}, "
                                       f"expected {last + 1}")
            last = event["seq"]
            yield event


class Service:
    """All campaign state behind one facade; thread-safe for the HTTP layer."""

    def __init__(self, data_dir=None, clock: Callable = now_ms):
        self.clock = clock
        self._registry_lock = threading.RLock()
        self._campaign_locks: dict = {}
        self.sensor_plugins: dict = {}
        self.campaigns: dict = {}
        self.coverage: dict = {}
        self.stores: dict = {}
        self.volunteers: dict = {}
        path = Path(data_dir) / LOG_NAME if data_dir is not None else None
        self.log = EventLog(path)
        if path is not None and path.exists():
            self._replay(path)
        self.log.open_for_append()

    # --- event application (shared by live writes and replay) ---------------

    def _replay(self, path: Path) -> None:
        applied = 0
        for event in EventLog.read_events(path):
            try:
                self._apply_event(event)
            except CorruptLog:
                raise
            except Exception as exc:
                raise CorruptLog(applied, f"event {event['seq']} "
                                          f"({event.get('type')}): {exc}") from exc
            applied = event["seq"]
        self.log.seq = applied

    def _apply_event(self, event: dict) -> None:
        etype = event["type"]
        if etype == "sensor_registered":
            spec = cmod.plugin_spec_from_doc(event["spec"])
            self.sensor_plugins[spec.id] = spec
        elif etype == "campaign_created":
            doc = event["doc"]
            date_range = cmod.parse_date_range(doc["date_range"])
            c = cmod.Campaign(
                id=event["campaign_id"],
                title=doc["title"],
                description=doc["description"],
                data_use=doc["data_use"],
                results_url=doc["results_url"],
                date_range=date_range,
                tz_offset_minutes=doc["tz_offset_minutes"],
                secret=bytes.fromhex(event["secret"]),
            )
            self.campaigns[c.id] = c
            self.coverage[c.id] = coverage.CoverageState()
            self.stores[c.id] = store.CampaignStore()
        elif etype == "region_added":
            c = self.campaigns[event["campaign_id"]]
            region = cmod.region_from_doc(event["region"], event["region"]["id"])
            c.regions.append(region)
            if self.stores[c.id].measurements:
                self._recount(c)
        elif etype == "region_updated":
            c = self.campaigns[event["campaign_id"]]
            region = cmod.region_from_doc(event["region"], event["region"]["id"])
            idx = next(i for i, r in enumerate(c.regions) if r.id == region.id)
            c.regions[idx] = region
            self._recount(c)
        elif etype == "experiment_attached":
            c = self.campaigns[event["campaign_id"]]
            spec_doc = event["spec"]
            spec = cmod.ExperimentPluginSpec(
                id=spec_doc["id"], version=spec_doc["version"],
                checksum=spec_doc["checksum"],
                required_sensors=tuple(spec_doc["required_sensors"]))
            c.experiment_plugin = spec
            for sid in spec.required_sensors:
                if sid not in c.required_sensor_plugins:
                    c.required_sensor_plugins.append(sid)
            c.status = "validated"
        elif etype == "status_set":
            self.campaigns[event["campaign_id"]].status = event["status"]
        elif etype == "volunteer_seen":
            self._volunteer(event["raw_id"])
        elif etype == "volunteer_power":
            v = self._volunteer(event["raw_id"])
            v.powered_on = event["on"]
        elif etype == "volunteer_sensors":
            v = self._volunteer(event["raw_id"])
            v.enabled_sensors = set(event["enabled"])
        elif etype == "volunteer_joined":
            v = self._volunteer(event["raw_id"])
            v.joined_campaigns.add(event["campaign_id"])
        elif etype == "measurement":
            c = self.campaigns[event["campaign_id"]]
            point = geo.GeoPoint(event["lon"], event["lat"])
            m = store.Measurement(
                campaign_id=c.id,
                volunteer_pseudonym=event["pseudonym"],
                sensor_id=event["sensor_id"],
                at=event["at"],
                point=point,
                value=event["value"],
                seq=event["seq"],
            )
            self.stores[c.id].add(m)
            coverage.apply(c, self.coverage[c.id], point, m.at)
        else:
            raise ValueError(f"unknown event type {etype!r}")

    def _recount(self, c: cmod.Campaign) -> None:
        st = self.stores[c.id]
        self.coverage[c.id] = coverage.recount(
            c, ((m.point, m.at) for m in st.measurements))

    def _volunteer(self, raw_id: str) -> store.VolunteerState:
        v = self.volunteers.get(raw_id)
        if v is None:
            v = self.volunteers[raw_id] = store.VolunteerState(raw_id)
        return v

    # --- locking -------------------------------------------------------------

    def _lock_for(self, campaign_id: str) -> threading.RLock:
        with self._registry_lock:
            lock = self._campaign_locks.get(campaign_id)
            if lock is None:
                lock = self._campaign_locks[campaign_id] = threading.RLock()
            return lock

    def _campaign(self, campaign_id) -> cmod.Campaign:
        if not isinstance(campaign_id, str):
            raise MalformedRequest("campaign id must be a string")
        c = self.campaigns.get(campaign_id)
        if c is None:
            raise UnknownCampaign(f"no campaign {campaign_id!r}")
        return c

    # --- registry -------------------------------------------------------------

    def register_sensor_plugin(self, doc) -> dict:
        spec = cmod.plugin_spec_from_doc(doc)
        with self._registry_lock:
            if spec.id in self.sensor_plugins:
                raise DuplicatePluginId(f"plugin {spec.id!r} already registered")
            self.log.append({"type": "sensor_registered",
                             "spec": cmod.plugin_spec_to_doc(spec)})
            self.sensor_plugins[spec.id] = spec
        return cmod.plugin_spec_to_doc(spec)

    def list_sensor_plugins(self, public_only: bool = False) -> list:
        with self._registry_lock:
            specs = sorted(self.sensor_plugins.values(), key=lambda s: s.id)
        if public_only:
            specs = [s for s in specs if s.public]
        return [cmod.plugin_spec_to_doc(s) for s in specs]

    # --- campaign lifecycle -----------------------------------------------------

    def create_campaign(self, doc) -> dict:
        if not isinstance(doc, dict):
            raise MalformedRequest("campaign must be an object")
        allowed = {"title", "description", "data_use", "results_url",
                   "date_range", "tz_offset_minutes"}
        unknown = set(doc) - allowed
        if unknown:
            raise MalformedRequest(f"unknown campaign fields: {sorted(unknown)} "
                                   "(regions are added via their own endpoint)")
        missing = allowed - set(doc)
        if missing:
            raise MalformedRequest(f"campaign needs: {sorted(missing)}")
        date_range = cmod.validate_campaign_fields(
            doc["title"], doc["description"], doc["data_use"],
            doc["results_url"], cmod.parse_date_range(doc["date_range"]),
            doc["tz_offset_minutes"])
        with self._registry_lock:
            cid = f"c{len(self.campaigns) + 1}"
            secret = secrets.token_bytes(32)
            event_doc = {
                "title": doc["title"], "description": doc["description"],
                "data_use": doc["data_use"], "results_url": doc["results_url"],
                "date_range": {"start": format_rfc3339(date_range[0]),
                               "end": format_rfc3339(date_range[1])},
                "tz_offset_minutes": doc["tz_offset_minutes"],
            }
            self.log.append({"type": "campaign_created", "campaign_id": cid,
                             "doc": event_doc, "secret": secret.hex()})
            self._apply_event({"type": "campaign_created", "campaign_id": cid,
                               "doc": event_doc, "secret": secret.hex()})
            return cmod.campaign_to_doc(self.campaigns[cid])

    def get_campaign(self, campaign_id) -> dict:
        with self._lock_for(str(campaign_id)):
            return cmod.campaign_to_doc(self._campaign(campaign_id))

    def set_status(self, campaign_id, status) -> dict:
        with self._lock_for(str(campaign_id)):
            c = self._campaign(campaign_id)
            cmod.check_transition(c.status, status)
            self.log.append({"type": "status_set", "campaign_id": c.id,
                             "status": status})
            c.status = status
            return cmod.campaign_to_doc(c)

    def add_region(self, campaign_id, doc) -> dict:
        with self._lock_for(str(campaign_id)):
            c = self._campaign(campaign_id)
            if c.status not in ("draft", "running", "paused"):
                raise IllegalTransition(
                    f"regions cannot be added while {c.status}")
            rid = f"r{len(c.regions) + 1}"
            region = cmod.region_from_doc(doc, rid)
            region_doc = cmod.region_to_doc(region)
            self.log.append({"type": "region_added", "campaign_id": c.id,
                             "region": region_doc})
            c.regions.append(region)
            if self.stores[c.id].measurements:
                self._recount(c)
            return region_doc

    def update_region(self, campaign_id, region_id, patch) -> dict:
        if not isinstance(patch, dict):
            raise MalformedRequest("region patch must be an object")
        with self._lock_for(str(campaign_id)):
            c = self._campaign(campaign_id)
            if c.status == "completed":
                raise CampaignCompleted("completed campaigns are immutable")
            current = c.region_by_id(str(region_id))
            if current is None:
                raise UnknownRegion(f"no region {region_id!r} in {c.id}")
            merged = cmod.region_to_doc(current)
            unknown = set(patch) - {"label", "polygon", "windows", "quota",
                                    "priority"}
            if unknown:
                raise MalformedRequest(f"unknown region fields: {sorted(unknown)}")
            for key in ("label", "polygon", "windows", "quota", "priority"):
                if key in patch:
                    merged[key] = patch[key]
            region = cmod.region_from_doc(merged, current.id)
            region_doc = cmod.region_to_doc(region)
            self.log.append({"type": "region_updated", "campaign_id": c.id,
                             "region": region_doc})
            idx = next(i for i, r in enumerate(c.regions) if r.id == current.id)
            c.regions[idx] = region
            self._recount(c)
            return region_doc

    def attach_experiment_plugin(self, campaign_id, spec_doc, artifact: bytes) -> dict:
        if not isinstance(spec_doc, dict):
            raise MalformedRequest("plugin spec must be an object")
        for key in ("id", "version", "checksum"):
            value = spec_doc.get(key)
            if not isinstance(value, str) or not value:
                raise MalformedRequest(f"experiment plugin needs {key!r}")
        required = spec_doc.get("required_sensors", [])
        if not isinstance(required, list):
            raise MalformedRequest("required_sensors must be a list")
        with self._lock_for(str(campaign_id)):
            c = self._campaign(campaign_id)
            if c.status != "draft":
                raise IllegalTransition(
                    f"experiment plugin attaches to drafts, campaign is {c.status}")
            if not c.regions:
                raise NoRegions("define at least one region before validating")
            cmod.validate_campaign_fields(
                c.title, c.description, c.data_use, c.results_url,
                c.date_range, c.tz_offset_minutes)
            with self._registry_lock:
                missing = [sid for sid in required
                           if sid not in self.sensor_plugins]
            if missing:
                raise MissingSensorPlugin(
                    f"required sensors not registered: {missing}")
            spec = cmod.ExperimentPluginSpec(
                id=spec_doc["id"], version=spec_doc["version"],
                checksum=spec_doc["checksum"].lower(),
                required_sensors=tuple(required))
            cmod.verify_artifact(spec, artifact)
            event = {"type": "experiment_attached", "campaign_id": c.id,
                     "spec": cmod.experiment_plugin_to_doc(spec)}
            self.log.append(event)
            self._apply_event(event)
            return cmod.campaign_to_doc(c)

    # --- volunteers ---------------------------------------------------------------

    @staticmethod
    def _require_volunteer_id(raw_id) -> str:
        if not isinstance(raw_id, str) or not raw_id:
            raise MalformedRequest("X-Volunteer-Id header required")
        return raw_id

    @staticmethod
    def _volunteer_doc(v: store.VolunteerState) -> dict:
        return {"powered_on": v.powered_on,
                "enabled_sensors": sorted(v.enabled_sensors),
                "joined_campaigns": sorted(v.joined_campaigns)}

    def set_power(self, raw_id, on) -> dict:
        raw_id = self._require_volunteer_id(raw_id)
        if not isinstance(on, bool):
            raise MalformedRequest("body must be {\"on\": true|false}")
        with self._registry_lock:
            self.log.append({"type": "volunteer_power", "raw_id": raw_id,
                             "on": on})
            v = self._volunteer(raw_id)
            v.powered_on = on
            return self._volunteer_doc(v)

    def set_sensors(self, raw_id, enabled) -> dict:
        raw_id = self._require_volunteer_id(raw_id)
        if (not isinstance(enabled, list)
                or any(not isinstance(s, str) for s in enabled)):
            raise MalformedRequest("body must be {\"enabled\": [plugin ids]}")
        with self._registry_lock:
            unknown = [s for s in enabled if s not in self.sensor_plugins]
            if unknown:
                raise MissingSensorPlugin(f"unknown sensor plugins: {unknown}")
            self.log.append({"type": "volunteer_sensors", "raw_id": raw_id,
                             "enabled": sorted(set(enabled))})
            v = self._volunteer(raw_id)
            v.enabled_sensors = set(enabled)
            return self._volunteer_doc(v)

    def join_experiment(self, campaign_id, raw_id) -> dict:
        raw_id = self._require_volunteer_id(raw_id)
        with self._lock_for(str(campaign_id)):
            c = self._campaign(campaign_id)
            if c.status == "completed":
                raise CampaignCompleted(f"campaign {c.id} has completed")
            if c.status not in ("validated", "running"):
                raise IllegalTransition(
                    f"campaign {c.id} is {c.status}, not open for joining")
            with self._registry_lock:
                self.log.append({"type": "volunteer_joined", "raw_id": raw_id,
                                 "campaign_id": c.id})
                v = self._volunteer(raw_id)
                v.joined_campaigns.add(c.id)
                missing = [sid for sid in c.required_sensor_plugins
                           if sid not in v.enabled_sensors]
            return {"campaign_id": c.id, "missing_sensors": missing}

    def volunteer_stats(self, raw_id) -> dict:
        raw_id = self._require_volunteer_id(raw_id)
        with self._registry_lock:
            if raw_id not in self.volunteers:
                raise UnknownVolunteer("volunteer has never contacted the service")
            campaigns = list(self.campaigns.values())
        per_campaign = {}
        total = 0
        first_at = None
        last_at = None
        for c in campaigns:
            pseudonym = store.anonymize(raw_id, c.secret)
            with self._lock_for(c.id):
                row = self.stores[c.id].by_pseudonym.get(pseudonym)
            if row is None:
                continue
            per_campaign[c.id] = row[0]
            total += row[0]
            if first_at is None or row[1] < first_at:
                first_at = row[1]
            if last_at is None or row[2] > last_at:
                last_at = row[2]
        return {
            "per_campaign": per_campaign,
            "total": total,
            "first_at": format_rfc3339(first_at) if first_at is not None else None,
            "last_at": format_rfc3339(last_at) if last_at is not None else None,
        }

    # --- ingestion -------------------------------------------------------------------

    def ingest(self, campaign_id, raw_id, readings) -> dict:
        """Per-reading acceptance; accepted readings are retained forever."""
        raw_id = self._require_volunteer_id(raw_id)
        if not isinstance(readings, list):
            raise MalformedRequest("body must be {\"readings\": [...]}")
        now = self.clock()
        with self._lock_for(str(campaign_id)):
            c = self._campaign(campaign_id)
            with self._registry_lock:
                if raw_id not in self.volunteers:
                    # first contact must survive restart for volunteer_stats
                    self.log.append({"type": "volunteer_seen", "raw_id": raw_id})
                v = self._volunteer(raw_id)
                snapshot = store.VolunteerState(
                    raw_id, v.powered_on, set(v.enabled_sensors),
                    set(v.joined_campaigns))
            pseudonym = store.anonymize(raw_id, c.secret)
            return self._ingest_batch(c, readings, now, volunteer=snapshot,
                                      pseudonym=pseudonym)

    def import_readings(self, campaign_id, readings) -> dict:
        """Ingest already-pseudonymized readings (export round-trips)."""
        if not isinstance(readings, list):
            raise MalformedRequest("expected a list of readings")
        now = self.clock()
        with self._lock_for(str(campaign_id)):
            c = self._campaign(campaign_id)
            return self._ingest_batch(c, readings, now, volunteer=None,
                                      pseudonym=None)

    def _ingest_batch(self, c, readings, now, volunteer, pseudonym) -> dict:
        accepted = 0
        rejected = []
        state = self.coverage[c.id]
        cstore = self.stores[c.id]
        for i, doc in enumerate(readings):
            try:
                if volunteer is not None:
                    parsed = store.parse_reading(doc)
                    point = store.check_acceptance(
                        c, volunteer, parsed["sensor_id"], parsed["at"],
                        parsed["lon"], parsed["lat"], now)
                    row_pseudonym = pseudonym
                else:
                    parsed = dict(doc)
                    row_pseudonym = parsed.get("volunteer")
                    point = store.check_import_acceptance(
                        c, row_pseudonym, parsed["at"], parsed["lon"],
                        parsed["lat"], parsed["value"], now)
            except CampaignError as exc:
                rejected.append({"index": i, "code": exc.code})
                continue
            except KeyError:
                rejected.append({"index": i, "code": "MALFORMED_REQUEST"})
                continue
            seq = self.log.append({
                "type": "measurement", "campaign_id": c.id,
                "pseudonym": row_pseudonym, "sensor_id": parsed["sensor_id"],
                "at": parsed["at"], "lon": point.lon, "lat": point.lat,
                "value": parsed["value"],
            })
            m = store.Measurement(c.id, row_pseudonym, parsed["sensor_id"],
                                  parsed["at"], point, parsed["value"], seq)
            cstore.add(m)
            coverage.apply(c, state, point, m.at)
            accepted += 1
        return {"accepted": accepted, "rejected": rejected}

    # --- reporting --------------------------------------------------------------------

    def completeness(self, campaign_id) -> dict:
        with self._lock_for(str(campaign_id)):
            c = self._campaign(campaign_id)
            return coverage.completeness_report(c, self.coverage[c.id])

    def heatmap(self, campaign_id, cell_deg) -> dict:
        try:
            cell = float(cell_deg)
        except (TypeError, ValueError):
            raise MalformedRequest("cell_deg must be a positive number") from None
        if not cell > 0:
            raise MalformedRequest("cell_deg must be a positive number")
        with self._lock_for(str(campaign_id)):
            c = self._campaign(campaign_id)
            points = [m.point for m in self.stores[c.id].measurements]
            return coverage.heatmap(c, points, cell)

    def points(self, campaign_id) -> dict:
        with self._lock_for(str(campaign_id)):
            c = self._campaign(campaign_id)
            payload = store.points_payload(self.stores[c.id])
            payload["campaign_id"] = c.id
            return payload

    def stats(self, campaign_ids) -> dict:
        ids = []
        for cid in campaign_ids:
            if cid not in ids:
                ids.append(cid)
        entries = []
        for cid in ids:
            with self._lock_for(str(cid)):
                c = self._campaign(cid)
                st = self.stores[c.id]
                entries.append((c, self.coverage[c.id].snapshot(),
                                set(st.by_pseudonym), len(st.measurements),
                                st.first_at))
        return coverage.group_stats(entries, self.clock())

    def recommendations(self, campaign_id, lon, lat, k) -> list:
        try:
            location = geo.GeoPoint(lon, lat)
        except CampaignError as exc:
            raise InvalidCoordinates(str(exc)) from exc
        if not isinstance(k, int) or k < 1:
            raise MalformedRequest("k must be an integer >= 1")
        with self._lock_for(str(campaign_id)):
            c = self._campaign(campaign_id)
            recs = guidance.recommend(c, self.coverage[c.id], location,
                                      self.clock(), k)
        return [guidance.recommendation_to_doc(r) for r in recs]

    def export(self, campaign_id, fmt) -> bytes:
        with self._lock_for(str(campaign_id)):
            c = self._campaign(campaign_id)
            return store.export_bytes(self.stores[c.id], fmt)

    def close(self) -> None:
        self.log.close()
