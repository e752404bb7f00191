import pytest

from campaignd import campaign as cmod
from campaignd.errors import (
    EmptyRequiredField,
    IllegalTransition,
    InvalidDateRange,
    InvalidPriority,
    InvalidQuota,
    InvalidWindow,
    ChecksumMismatch,
    MalformedRequest,
)
from campaignd.timeutil import MINUTE_MS, parse_rfc3339

from factories import DEFAULT_RANGE, make_campaign, region_doc

T0 = parse_rfc3339(DEFAULT_RANGE[0])  # Monday 2025-05-05 00:00Z
T_END = parse_rfc3339(DEFAULT_RANGE[1])


def at(day, hour, minute=0):
    return T0 + ((day * 24 + hour) * 60 + minute) * MINUTE_MS


class TestFieldValidation:
    def good(self, **kw):
        args = dict(title="t", description="d", data_use="u",
                    results_url="https://x", date_range=(T0, T_END),
                    tz_offset_minutes=0)
        args.update(kw)
        return cmod.validate_campaign_fields(
            args["title"], args["description"], args["data_use"],
            args["results_url"], args["date_range"], args["tz_offset_minutes"])

    def test_ok(self):
        assert self.good() == (T0, T_END)

    @pytest.mark.parametrize("field", ["title", "description", "data_use", "results_url"])
    def test_empty_required_field(self, field):
        with pytest.raises(EmptyRequiredField):
            self.good(**{field: ""})
        with pytest.raises(EmptyRequiredField):
            self.good(**{field: "   "})

    def test_inverted_date_range(self):
        with pytest.raises(InvalidDateRange):
            self.good(date_range=(T_END, T0))
        with pytest.raises(InvalidDateRange):
            self.good(date_range=(T0, T0))

    def test_tz_offset_bounds(self):
        self.good(tz_offset_minutes=-720)
        self.good(tz_offset_minutes=840)
        with pytest.raises(MalformedRequest):
            self.good(tz_offset_minutes="+01:00")


class TestBuilders:
    def test_quota(self):
        q = cmod.build_quota(5, 10)
        assert (q.min_count, q.max_count) == (5, 10)
        assert cmod.build_quota(5, None).max_count is None
        for bad in [(0, None), (-3, None), (5, 4), ("5", None)]:
            with pytest.raises(InvalidQuota):
                cmod.build_quota(*bad)

    def test_window(self):
        w = cmod.build_window("w1", 420, 600, [0, 1, 2, 3, 4])
        assert w.days_active == frozenset({0, 1, 2, 3, 4})
        with pytest.raises(InvalidWindow):
            cmod.build_window("w1", 600, 600, [0])
        with pytest.raises(InvalidWindow):
            cmod.build_window("w1", 600, 420, [0])

    def test_priority(self):
        for bad in [0.0, -1.0, float("inf"), float("nan")]:
            with pytest.raises(InvalidPriority):
                make_campaign([region_doc(priority=bad)])


class TestTransitions:
    ALLOWED = [("validated", "running"), ("running", "paused"),
               ("paused", "running"), ("running", "completed"),
               ("paused", "completed")]

    def test_allowed_edges(self):
        for cur, tgt in self.ALLOWED:
            cmod.check_transition(cur, tgt)  # no raise

    def test_draft_cannot_validate_by_status(self):
        with pytest.raises(IllegalTransition, match="attach"):
            cmod.check_transition("draft", "validated")

    def test_everything_else_rejected(self):
        statuses = ("draft", "validated", "running", "paused", "completed")
        for cur in statuses:
            for tgt in statuses:
                if (cur, tgt) in self.ALLOWED or (cur, tgt) == ("draft", "validated"):
                    continue
                with pytest.raises(IllegalTransition):
                    cmod.check_transition(cur, tgt)

    def test_unknown_status_is_malformed(self):
        with pytest.raises(MalformedRequest):
            cmod.check_transition("running", "archived")


class TestWindowMatching:
    def setup_method(self):
        self.c = make_campaign([region_doc(
            windows=[{"start": "08:00", "end": "10:00",
                      "days": ["Mon", "Tue", "Wed", "Thu", "Fri"]}])])
        self.w = self.c.regions[0].windows[0]

    def m(self, at_ms, tz=0):
        return cmod.instant_matches(self.w, at_ms, tz, self.c.date_range)

    def test_half_open_minutes(self):
        assert self.m(at(0, 8))                       # 08:00 inclusive
        assert self.m(at(0, 9, 59))
        assert not self.m(at(0, 10))                  # 10:00 exclusive
        assert not self.m(at(0, 7, 59))

    def test_date_range_half_open(self):
        assert not self.m(T0 - 1)
        assert not self.m(T_END)
        assert self.m(T0 + 8 * 60 * MINUTE_MS)

    def test_weekday_gate(self):
        # day 5 after Monday = Saturday, but the range ends Friday midnight
        sat = make_campaign([region_doc(
            windows=[{"start": "08:00", "end": "10:00", "days": ["Sat"]}])],
            date_range=("2025-05-05T00:00:00.000Z", "2025-05-12T00:00:00.000Z"))
        w = sat.regions[0].windows[0]
        assert cmod.instant_matches(w, at(5, 9), 0, sat.date_range)
        assert not cmod.instant_matches(w, at(4, 9), 0, sat.date_range)

    def test_tz_offset_shifts_local_day(self):
        # 23:30Z Monday is 01:30 Tuesday at +120; a Tue window matches
        tue = make_campaign([region_doc(
            windows=[{"start": "01:00", "end": "02:00", "days": ["Tue"]}])], tz=120)
        w = tue.regions[0].windows[0]
        assert cmod.instant_matches(w, at(0, 23, 30), 120, tue.date_range)
        assert not cmod.instant_matches(w, at(0, 23, 30), 0, tue.date_range)


class TestMinutesUntilOpen:
    def setup_method(self):
        self.c = make_campaign([region_doc(
            windows=[{"start": "08:00", "end": "10:00",
                      "days": ["Mon", "Tue", "Wed", "Thu", "Fri"]}])])
        self.w = self.c.regions[0].windows[0]

    def u(self, now):
        return cmod.minutes_until_open(self.w, now, 0, self.c.date_range)

    def test_open_now_is_zero(self):
        assert self.u(at(0, 9)) == 0.0

    def test_counts_down_to_start(self):
        assert self.u(at(0, 6)) == 120.0
        assert self.u(at(0, 7, 59)) == 1.0

    def test_rolls_to_next_active_day(self):
        assert self.u(at(0, 11)) == (24 - 11 + 8) * 60.0

    def test_none_when_range_exhausted(self):
        assert self.u(T_END - MINUTE_MS) is None

    def test_window_midopen_at_range_start_waits_for_next_boundary(self):
        # before the range starts, an already-in-progress window does not
        # count as "opening"; the next start boundary inside the range does
        mid = make_campaign([region_doc(
            windows=[{"start": "23:00", "end": "24:00"}])],
            date_range=("2025-05-05T23:30:00.000Z", "2025-05-10T00:00:00.000Z"))
        w = mid.regions[0].windows[0]
        got = cmod.minutes_until_open(w, at(0, 23, 0), 0, mid.date_range)
        assert got == 24 * 60.0  # Tuesday 23:00, not 23:30 tonight


class TestDocs:
    def test_region_round_trip(self):
        doc = region_doc(windows=[
            {"start": "07:00", "end": "10:00", "days": ["Mon", "Fri"]},
            {"start": "16:00", "end": "24:00"},
        ], quota={"min_count": 10, "max_count": 20}, priority=2.5)
        r = cmod.region_from_doc(doc, "r1")
        assert [w.id for w in r.windows] == ["w1", "w2"]
        assert r.windows[1].end_minute == 1440
        assert r.windows[1].days_active == frozenset(range(7))
        out = cmod.region_to_doc(r)
        assert cmod.region_to_doc(cmod.region_from_doc(out, "r1")) == out

    def test_end_midnight_alias(self):
        doc = region_doc(windows=[{"start": "22:00", "end": "00:00"}])
        r = cmod.region_from_doc(doc, "r1")
        assert r.windows[0].end_minute == 1440

    def test_campaign_doc_never_carries_secret(self):
        c = make_campaign()
        doc = cmod.campaign_to_doc(c)
        flat = repr(doc)
        assert "secret" not in flat
        assert c.secret.hex() not in flat

    def test_window_doc_days_sorted(self):
        doc = region_doc(windows=[{"start": "07:00", "end": "10:00",
                                   "days": ["Fri", "Mon", "Wed"]}])
        out = cmod.region_to_doc(cmod.region_from_doc(doc, "r1"))
        assert out["windows"][0]["days"] == ["Mon", "Wed", "Fri"]


class TestArtifacts:
    def test_checksum_round_trip(self):
        blob = b"experiment bytes"
        spec = cmod.ExperimentPluginSpec(
            id="exp-1", version="1.0",
            checksum=cmod.artifact_checksum(blob), required_sensors=("s1",))
        cmod.verify_artifact(spec, blob)  # no raise
        with pytest.raises(ChecksumMismatch):
            cmod.verify_artifact(spec, blob + b"x")
