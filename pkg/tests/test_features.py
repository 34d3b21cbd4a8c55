from __future__ import annotations

import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warnlab.errors import ExtractionError, ValidationError
from warnlab.features import (
    SCOPE_FILE,
    SCOPE_PATTERN,
    FLAG_EMPTY_FILE_POPULATION,
    FLAG_METHOD_FILE_FALLBACK,
    FLAG_NO_CLOSED_LIFETIME,
    LeakMode,
    MatrixRow,
    WarningPopulation,
    audit_time_travel,
    defect_likelihood,
    discretized_defect_likelihood,
    extract_golden,
    lifetime_stats,
    read_feature_matrix,
    warning_context,
    write_feature_matrix,
)
from warnlab.history import WarningKey, truncate_history
from warnlab.oracle import Label, heuristic_label
from warnlab.synth import SynthConfig, generate

from conftest import attrs_line, change_line, make_history, rev_line, warn_line


def _k(i: int, pattern: str = "P") -> WarningKey:
    return WarningKey(pattern, f"src/f{i}.java", "com.a", f"C{i}", None)


def _pop(closed_flags, scope=SCOPE_FILE, pattern="P") -> WarningPopulation:
    members = tuple((_k(i, pattern), bool(c)) for i, c in enumerate(closed_flags))
    return WarningPopulation(scope, members)


class TestPopulationFormulas:
    def test_warning_context_examples(self):
        assert warning_context(_pop([1, 1, 1, 0])) == 0.5
        assert warning_context(_pop([1] * 7)) == 1.0
        assert warning_context(_pop([])) == 0.0

    def test_defect_likelihood_examples(self):
        assert defect_likelihood(_pop([1, 1, 0, 0, 0, 0, 0, 0])) == 0.25
        assert defect_likelihood(_pop([0] * 5)) == 0.0
        assert defect_likelihood(_pop([])) == 0.0

    def test_defect_likelihood_brute_force(self):
        rng = random.Random(17)
        for _ in range(300):
            flags = [rng.random() < 0.4 for _ in range(rng.randint(1, 30))]
            pop = _pop(flags)
            closed = 0
            for _, is_closed in pop.members:
                if is_closed:
                    closed += 1
            assert defect_likelihood(pop) == closed / len(flags)

    @given(st.lists(st.booleans(), max_size=60))
    @settings(max_examples=120, deadline=None)
    def test_ranges(self, flags):
        pop = _pop(flags)
        assert -1.0 <= warning_context(pop) <= 1.0
        assert 0.0 <= defect_likelihood(pop) <= 1.0

    def test_scale_identity(self):
        rng = random.Random(3)
        for _ in range(50):
            flags = [rng.random() < 0.5 for _ in range(rng.randint(1, 20))]
            single = _pop(flags)
            doubled = _pop(flags + flags)
            assert warning_context(doubled) == warning_context(single)
            assert defect_likelihood(doubled) == defect_likelihood(single)


class TestDiscretization:
    def test_hand_evaluated_two_patterns(self):
        # D(p1)=0.2 over 10, D(p2)=0.6 over 10, pooled D(T)=0.4:
        # ((-0.2)^2 + (0.2)^2) / (2-1) = 0.08
        pops = {
            "p1": _pop([1, 1] + [0] * 8, SCOPE_PATTERN, "p1"),
            "p2": _pop([1] * 6 + [0] * 4, SCOPE_PATTERN, "p2"),
        }
        assert discretized_defect_likelihood(pops) == pytest.approx(0.08, abs=1e-15)

    def test_zero_variance(self):
        pops = {
            "p1": _pop([1, 0], SCOPE_PATTERN, "p1"),
            "p2": _pop([1, 0], SCOPE_PATTERN, "p2"),
            "p3": _pop([1, 0, 1, 0], SCOPE_PATTERN, "p3"),
        }
        assert discretized_defect_likelihood(pops) == 0.0

    def test_three_pattern_direct_sum_oracle(self):
        rng = random.Random(11)
        for _ in range(100):
            pops = {}
            for name in ("pa", "pb", "pc"):
                flags = [rng.random() < 0.5 for _ in range(rng.randint(1, 12))]
                pops[name] = _pop(flags, SCOPE_PATTERN, name)
            total = sum(len(p) for p in pops.values())
            closed = sum(p.closed_count for p in pops.values())
            pooled = closed / total
            expected = 0.0
            for name in sorted(pops):
                pop = pops[name]
                expected += (pop.closed_count / len(pop) - pooled) ** 2
            expected /= len(pops) - 1
            assert discretized_defect_likelihood(pops) == expected

    def test_single_pattern_yields_zero(self):
        assert discretized_defect_likelihood({"p": _pop([1, 0], SCOPE_PATTERN)}) == 0.0
        assert discretized_defect_likelihood({}) == 0.0
        assert 0.0 <= discretized_defect_likelihood(
            {"p": _pop([1], SCOPE_PATTERN), "q": _pop([0], SCOPE_PATTERN, "q")}
        )


class TestLifetimeStats:
    def _history(self):
        lines = [rev_line(f"r{i}", day=10 * i) for i in range(4)]  # days 0,10,20,30
        # Target warning: open the whole time.
        for i in range(4):
            lines.append(warn_line(f"r{i}", path="src/t.java", cls="T", pattern="PT",
                                   category="CAT"))
        # Two same-category closures: 10-day and 20-day lifetimes.
        lines.append(warn_line("r0", path="src/a.java", cls="A", pattern="PA",
                               category="CAT"))
        lines += [warn_line(rid, path="src/b.java", cls="B", pattern="PB",
                            category="CAT") for rid in ("r0", "r1")]
        return make_history(lines)

    def test_first_seen_at_eval_revision(self):
        h = make_history([
            rev_line("r0", 0), rev_line("r1", 10), warn_line("r1"),
        ])
        key = h.keys_at("r1")[0]
        assert lifetime_stats(h, key, "r1").lifetime_revisions == 1

    def test_five_consecutive_revisions(self):
        lines = [rev_line(f"r{i}", day=i) for i in range(5)]
        lines += [warn_line(f"r{i}") for i in range(5)]
        h = make_history(lines)
        key = h.keys_at("r0")[0]
        assert lifetime_stats(h, key, "r4").lifetime_revisions == 5

    def test_planted_average_lifetime(self):
        h = self._history()
        target = next(k for k in h.keys_at("r3") if k.class_name == "T")
        stats = lifetime_stats(h, target, "r3")
        assert stats.lifetime_revisions == 4
        assert stats.average_lifetime_for_type == pytest.approx(15.0, abs=1e-12)
        assert not stats.no_closures_for_type

    def test_revision_unit_toggle(self):
        h = self._history()
        target = next(k for k in h.keys_at("r3") if k.class_name == "T")
        stats = lifetime_stats(h, target, "r3", lifetime_unit="revisions")
        assert stats.average_lifetime_for_type == pytest.approx(1.5)

    def test_unseen_key_errors(self):
        h = self._history()
        ghost = WarningKey("ZZ", "src/q.java", "com.a", "Q", None)
        with pytest.raises(ValidationError):
            lifetime_stats(h, ghost, "r3")


def _single_warning_files_history():
    """Four files, one warning each; two close by the reference revision."""
    lines = [rev_line("r0", 0), rev_line("r1", 30), rev_line("r2", 800)]
    for i in range(4):
        path = f"src/w{i}.java"
        common = dict(path=path, cls=f"W{i}", pattern=f"P{i % 2}",
                      category="CAT")
        lines.append(warn_line("r0", **common))
        lines.append(warn_line("r1", **common))
        if i >= 2:  # stays open at the reference
            lines.append(warn_line("r2", **common))
        lines.append(attrs_line("r1", path=path, cls=f"W{i}", pattern=f"P{i % 2}"))
        lines.append(change_line("r0", path, "Add", lines_added=50, author=f"dev{i}"))
    return make_history(lines)


class TestExtractGolden:
    def test_leaky_reconstructs_labels_in_single_warning_files(self):
        h = _single_warning_files_history()
        vectors = extract_golden(h, "r1", LeakMode.leaky(), "r2")
        labels = {lw.key: lw.label for lw in heuristic_label(h, "r1", "r2")}
        for key, vec in vectors.items():
            if labels[key] is Label.ACTIONABLE:
                assert vec.warning_context_in_file == 1.0
            elif labels[key] is Label.FALSE_ALARM:
                assert vec.warning_context_in_file == -1.0

    def test_leaky_full_closure_in_file_gives_context_one(self):
        lines = [rev_line("r0", 0), rev_line("r1", 30), rev_line("r2", 800)]
        for pattern in ("PA", "PB"):
            lines.append(warn_line("r1", pattern=pattern, category="CAT"))
            lines.append(attrs_line("r1", pattern=pattern))
        h = make_history(lines)
        vectors = extract_golden(h, "r1", LeakMode.leaky(), "r2")
        for vec in vectors.values():
            assert vec.warning_context_in_file == 1.0

    def test_leakfree_equals_truncated_extraction(self):
        result = generate(SynthConfig(seed=13, n_files=10, n_revisions=24,
                                      warnings_per_revision=6,
                                      fix_delay_days=(30.0, 400.0)))
        h, a = result.history, result.anchors
        full = extract_golden(h, a.train, LeakMode.leakfree())
        cut = extract_golden(truncate_history(h, a.train), a.train, LeakMode.leakfree())
        assert full == cut

    def test_guard_bypass_detected_by_audit(self):
        result = generate(SynthConfig(seed=13, n_files=10, n_revisions=24,
                                      warnings_per_revision=6,
                                      fix_delay_days=(30.0, 400.0)))
        h, a = result.history, result.anchors
        clean = audit_time_travel(h, a.train, LeakMode.leakfree())
        assert clean.ok

        def breached(history, at_rev, mode):
            return extract_golden(history, at_rev, mode,
                                  _bypass_time_travel_guard=True)

        audit = audit_time_travel(h, a.train, LeakMode.leakfree(), extractor=breached)
        assert not audit.ok
        assert audit.mismatched_keys

    def test_leaky_requires_reference(self):
        h = _single_warning_files_history()
        with pytest.raises(ValidationError):
            extract_golden(h, "r1", LeakMode.leaky())
        with pytest.raises(ValidationError):
            extract_golden(h, "r1", LeakMode.leakfree(), "r2")

    def test_missing_attrs_reported_per_warning(self):
        lines = [
            rev_line("r0", 0), rev_line("r1", 30),
            warn_line("r1", cls="NoAttrs"),
        ]
        h = make_history(lines)
        with pytest.raises(ExtractionError, match="NoAttrs"):
            extract_golden(h, "r1", LeakMode.leakfree())

    def test_out_of_window_population_flagged_empty(self):
        lines = [
            rev_line("r0", 0), rev_line("r1", 400),
            warn_line("r0"), warn_line("r1"),
            attrs_line("r1"),
        ]
        h = make_history(lines)
        (vec,) = extract_golden(h, "r1", LeakMode.leakfree(365.0)).values()
        assert vec.warning_context_in_file == 0.0
        assert FLAG_EMPTY_FILE_POPULATION in vec.flags
        # A wider window pulls the warning back into its own population.
        (vec_wide,) = extract_golden(h, "r1", LeakMode.leakfree(1000.0)).values()
        assert FLAG_EMPTY_FILE_POPULATION not in vec_wide.flags
        assert vec_wide.warning_context_in_file == -1.0  # open member only

    def test_methodless_warning_falls_back_to_file_population(self):
        lines = [
            rev_line("r0", 0), rev_line("r1", 30),
            warn_line("r1", method=None),
            warn_line("r1", pattern="P2", category="CORRECTNESS", method="m()", line=20),
            attrs_line("r1"),
            attrs_line("r1", pattern="P2", method="m()"),
        ]
        h = make_history(lines)
        vectors = extract_golden(h, "r1", LeakMode.leakfree())
        methodless = next(v for v in vectors.values() if v.warning_pattern == "NP_NULL_DEREF")
        assert FLAG_METHOD_FILE_FALLBACK in methodless.flags
        assert methodless.warning_context_in_method == methodless.warning_context_in_file
        withmethod = next(v for v in vectors.values() if v.warning_pattern == "P2")
        assert FLAG_METHOD_FILE_FALLBACK not in withmethod.flags

    def test_no_closures_flagged(self):
        h = _single_warning_files_history()
        vectors = extract_golden(h, "r1", LeakMode.leakfree())
        for vec in vectors.values():
            assert vec.average_lifetime_for_warning_type == 0.0
            assert FLAG_NO_CLOSED_LIFETIME in vec.flags

    def test_output_sorted_by_key(self):
        result = generate(SynthConfig(seed=2, n_files=6, n_revisions=16,
                                      warnings_per_revision=5))
        vectors = extract_golden(result.history, result.anchors.train, LeakMode.leakfree())
        keys = list(vectors)
        assert keys == sorted(keys, key=WarningKey.sort_key)

    def test_ranges_on_synth(self):
        result = generate(SynthConfig(seed=4, n_files=8, n_revisions=20,
                                      warnings_per_revision=6,
                                      fix_delay_days=(20.0, 300.0)))
        h, a = result.history, result.anchors
        for vec in extract_golden(h, a.test, LeakMode.leaky(), a.reference).values():
            assert -1.0 <= vec.warning_context_in_method <= 1.0
            assert -1.0 <= vec.warning_context_in_file <= 1.0
            assert -1.0 <= vec.warning_context_for_warning_type <= 1.0
            assert 0.0 <= vec.defect_likelihood_for_warning_pattern <= 1.0
            assert vec.discretization_of_defect_likelihood >= 0.0
            assert vec.file_age_days >= 0.0
            assert vec.warning_lifetime_revisions >= 1
            assert vec.developers >= 0
            assert vec.loc_added_in_file_last_25_revisions >= 0


class TestHistoryDerivedFeatures:
    def _churn_history(self):
        lines = [rev_line(f"r{i}", day=30 * i) for i in range(6)]  # days 0..150
        lines.append(change_line("r0", "src/a/Foo.java", "Add", lines_added=100, author="ann"))
        lines.append(change_line("r2", "src/a/Foo.java", "Modify", lines_added=40, author="bob"))
        lines.append(change_line("r4", "src/a/Foo.java", "Modify", lines_added=7, author="ann"))
        for i in range(6):
            lines.append(warn_line(f"r{i}"))
        lines.append(attrs_line("r5"))
        return make_history(lines)

    def test_file_age_and_creation(self):
        h = self._churn_history()
        (vec,) = extract_golden(h, "r5", LeakMode.leakfree(1e4)).values()
        assert vec.file_age_days == pytest.approx(150.0)
        assert vec.developers == 2

    def test_package_churn_window(self):
        h = self._churn_history()
        (vec,) = extract_golden(h, "r5", LeakMode.leakfree(1e4)).values()
        # Only the r4 modify (day 120) falls within 90 days of day 150.
        assert vec.loc_added_in_package_past_3_months == 7
        assert vec.loc_added_in_file_last_25_revisions == 147

    def test_rename_keeps_file_history(self):
        lines = [rev_line(f"r{i}", day=30 * i) for i in range(4)]
        lines.append(change_line("r0", "src/a/Old.java", "Add", lines_added=80, author="ann"))
        lines.append(warn_line("r0", path="src/a/Old.java"))
        lines.append(warn_line("r1", path="src/a/Old.java"))
        lines.append(change_line("r2", "src/a/New.java", "Rename",
                                 old_path="src/a/Old.java", author="bob"))
        lines.append(warn_line("r2", path="src/a/New.java"))
        lines.append(warn_line("r3", path="src/a/New.java"))
        lines.append(attrs_line("r3", path="src/a/New.java"))
        h = make_history(lines)
        (vec,) = extract_golden(h, "r3", LeakMode.leakfree(1e4)).values()
        assert vec.file_age_days == pytest.approx(90.0)  # back through the rename
        assert vec.developers == 2
        assert vec.warning_lifetime_revisions == 4  # bridged presence


class TestMatrixRoundTrip:
    def test_csv_round_trip(self):
        result = generate(SynthConfig(seed=6, n_files=6, n_revisions=16,
                                      warnings_per_revision=4))
        h, a = result.history, result.anchors
        vectors = extract_golden(h, a.train, LeakMode.leakfree())
        rows = [
            MatrixRow(key=key, origin_rev=a.train, label="Actionable",
                      mode="leakfree", vector=vec)
            for key, vec in vectors.items()
        ]
        buffer = io.StringIO()
        write_feature_matrix(buffer, rows)
        buffer.seek(0)
        assert read_feature_matrix(buffer) == rows
