"""Annotation service tests: session lifecycle, circle editing over HTTP,
centroid-follow tracking with the jump guard, and export round trips."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from scandet.dataset import (
    EXPORT_SCHEMA_VERSION,
    Dataset,
    import_annotations,
    save_dataset,
)
from scandet.geometry import FROG_META, circle_from_center, polar_to_cartesian
from scandet.service import API_SCHEMA_VERSION, AnnotationService, create_app


@pytest.fixture()
def client():
    return TestClient(create_app(AnnotationService()))


@pytest.fixture()
def session_id(client, toy_dataset_path):
    resp = client.post("/sessions", json={"dataset_path": str(toy_dataset_path)})
    assert resp.status_code == 200
    return resp.json()["session_id"]


def _circle_row(x, y, r):
    c = circle_from_center(x, y, r)
    return [c.x, c.y, c.radius, c.angle, c.distance, c.half_angle]


def _crafted_dataset(scan_ranges, circle_rows_per_scan):
    """Dataset with explicit per-beam ranges and per-scan circle rows."""
    n = len(scan_ranges)
    scans = np.full((n, FROG_META.num_points), 60.0, dtype=np.float32)
    for i, assignments in enumerate(scan_ranges):
        for beams, dist in assignments:
            scans[i, beams] = dist
    rows = [row for rows_ in circle_rows_per_scan for row in rows_]
    circle_num = np.array(
        [len(rows_) for rows_ in circle_rows_per_scan], dtype=np.uint32
    )
    circle_idx = np.zeros(n, dtype=np.uint32)
    circle_idx[1:] = np.cumsum(circle_num)[:-1]
    circles = (
        np.asarray(rows, dtype=np.float32)
        if rows
        else np.zeros((0, 6), dtype=np.float32)
    )
    return Dataset(
        scans=scans,
        timestamps=(1.6e9 + np.arange(n) * 0.025).astype(np.float64),
        circles=circles,
        circle_idx=circle_idx,
        circle_num=circle_num,
        split=np.zeros(n, dtype=np.uint8),
        meta=FROG_META,
    )


class TestSessions:
    def test_open_and_meta(self, client, session_id):
        resp = client.get(f"/sessions/{session_id}/meta")
        assert resp.status_code == 200
        meta = resp.json()
        assert meta["schema_version"] == API_SCHEMA_VERSION
        assert meta["frames"] == 60
        assert meta["sensor"]["num_points"] == FROG_META.num_points
        assert meta["sensor"]["frequency"] == FROG_META.frequency

    def test_open_missing_dataset_is_400(self, client, tmp_path):
        resp = client.post(
            "/sessions", json={"dataset_path": str(tmp_path / "absent.h5")}
        )
        assert resp.status_code == 400

    def test_unknown_session_is_404(self, client):
        assert client.get("/sessions/nope/meta").status_code == 404
        assert client.get("/sessions/nope/frames/0").status_code == 404
        assert client.post("/sessions/nope/export").status_code == 404

    def test_sessions_are_independent(self, client, toy_dataset_path):
        a = client.post(
            "/sessions", json={"dataset_path": str(toy_dataset_path)}
        ).json()["session_id"]
        b = client.post(
            "/sessions", json={"dataset_path": str(toy_dataset_path)}
        ).json()["session_id"]
        assert a != b
        client.post(
            f"/sessions/{a}/frames/0/circles",
            json={"action": "add", "x": 1.0, "y": 1.0, "radius": 0.3},
        )
        circles_a = client.get(f"/sessions/{a}/frames/0").json()["circles"]
        circles_b = client.get(f"/sessions/{b}/frames/0").json()["circles"]
        assert len(circles_a) == len(circles_b) + 1


class TestFrames:
    def test_frame_payload_shape(self, client, session_id, toy_dataset):
        resp = client.get(f"/sessions/{session_id}/frames/0")
        assert resp.status_code == 200
        frame = resp.json()
        assert frame["schema_version"] == API_SCHEMA_VERSION
        assert frame["frame"] == 0
        assert frame["timestamp"] == pytest.approx(float(toy_dataset.timestamps[0]))
        assert all(len(p) == 2 for p in frame["points"])
        for c in frame["circles"]:
            assert set(c) == {"person_id", "x", "y", "radius", "lost"}
            assert c["lost"] is False

    def test_ground_truth_circles_are_seeded(self, client, session_id, toy_dataset):
        total = 0
        for i in range(toy_dataset.num_scans):
            total += len(
                client.get(f"/sessions/{session_id}/frames/{i}").json()["circles"]
            )
        assert total == int(toy_dataset.circle_num.sum())

    def test_frame_out_of_range_is_404(self, client, session_id):
        assert client.get(f"/sessions/{session_id}/frames/60").status_code == 404
        assert client.get(f"/sessions/{session_id}/frames/-1").status_code == 404


class TestCircleEditing:
    def test_add_move_resize_delete(self, client, session_id):
        before = client.get(f"/sessions/{session_id}/frames/3").json()["circles"]
        added = client.post(
            f"/sessions/{session_id}/frames/3/circles",
            json={"action": "add", "x": 2.0, "y": -1.0, "radius": 0.25},
        ).json()
        assert added["x"] == pytest.approx(2.0)
        assert added["radius"] == pytest.approx(0.25)
        pid = added["person_id"]
        assert pid not in {c["person_id"] for c in before}

        moved = client.post(
            f"/sessions/{session_id}/frames/3/circles",
            json={"action": "move", "person_id": pid, "x": 2.5, "y": -0.5},
        ).json()
        assert (moved["x"], moved["y"]) == (pytest.approx(2.5), pytest.approx(-0.5))
        assert moved["radius"] == pytest.approx(0.25)

        resized = client.post(
            f"/sessions/{session_id}/frames/3/circles",
            json={"action": "resize", "person_id": pid, "radius": 0.4},
        ).json()
        assert resized["radius"] == pytest.approx(0.4)
        assert (resized["x"], resized["y"]) == (
            pytest.approx(2.5),
            pytest.approx(-0.5),
        )

        deleted = client.post(
            f"/sessions/{session_id}/frames/3/circles",
            json={"action": "delete", "person_id": pid},
        ).json()
        assert deleted == {"deleted": pid}
        after = client.get(f"/sessions/{session_id}/frames/3").json()["circles"]
        assert pid not in {c["person_id"] for c in after}
        assert len(after) == len(before)

    def test_unknown_circle_is_404(self, client, session_id):
        resp = client.post(
            f"/sessions/{session_id}/frames/0/circles",
            json={"action": "move", "person_id": 99999, "x": 0.0, "y": 1.0},
        )
        assert resp.status_code == 404

    def test_unknown_action_is_400(self, client, session_id):
        resp = client.post(
            f"/sessions/{session_id}/frames/0/circles", json={"action": "rotate"}
        )
        assert resp.status_code == 400

    def test_invalid_radius_is_400(self, client, session_id):
        resp = client.post(
            f"/sessions/{session_id}/frames/0/circles",
            json={"action": "add", "x": 1.0, "y": 1.0, "radius": -0.2},
        )
        assert resp.status_code == 400


class TestTracking:
    @pytest.fixture()
    def track_path(self, tmp_path):
        # Frame 0: a beam cluster near angle 0 at 3.0 m (annotated) and a
        # second cluster at beam 180 (annotated). Frame 1: the first
        # cluster recedes to 3.2 m (centroid jump ~0.2 m, under the guard),
        # the second vanishes entirely.
        front = slice(355, 366)
        angles = FROG_META.angles
        pts0 = np.stack(
            [3.0 * np.cos(angles[front]), 3.0 * np.sin(angles[front])], axis=1
        )
        c0 = pts0.mean(axis=0)
        side = slice(178, 183)
        pts_side = np.stack(
            [4.0 * np.cos(angles[side]), 4.0 * np.sin(angles[side])], axis=1
        )
        cs = pts_side.mean(axis=0)
        ds = _crafted_dataset(
            scan_ranges=[
                [(front, 3.0), (side, 4.0)],
                [(front, 3.2)],
            ],
            circle_rows_per_scan=[
                [_circle_row(c0[0], c0[1], 0.3), _circle_row(cs[0], cs[1], 0.3)],
                [],
            ],
        )
        path = tmp_path / "track.h5"
        save_dataset(ds, path)
        return path

    def test_follow_and_lost(self, client, track_path):
        sid = client.post("/sessions", json={"dataset_path": str(track_path)}).json()[
            "session_id"
        ]
        frame0 = client.get(f"/sessions/{sid}/frames/0").json()["circles"]
        by_dist = sorted(frame0, key=lambda c: np.hypot(c["x"], c["y"]))
        near, far = by_dist[0], by_dist[1]

        resp = client.post(f"/sessions/{sid}/track", params={"from": 0})
        assert resp.status_code == 200
        tracked = {c["person_id"]: c for c in resp.json()["circles"]}
        assert resp.json()["frame"] == 1
        assert set(tracked) == {near["person_id"], far["person_id"]}

        followed = tracked[near["person_id"]]
        assert followed["lost"] is False
        # The cluster receded radially from ~3.0 to 3.2 m.
        assert np.hypot(followed["x"], followed["y"]) == pytest.approx(3.2, abs=0.05)
        assert followed["radius"] == pytest.approx(near["radius"])

        lost = tracked[far["person_id"]]
        assert lost["lost"] is True
        assert (lost["x"], lost["y"]) == (
            pytest.approx(far["x"]),
            pytest.approx(far["y"]),
        )

        # The tracked frame is persisted, lost flag included.
        frame1 = client.get(f"/sessions/{sid}/frames/1").json()["circles"]
        assert {c["person_id"]: c["lost"] for c in frame1} == {
            near["person_id"]: False,
            far["person_id"]: True,
        }

    def test_multi_step(self, client, toy_dataset_path):
        sid = client.post(
            "/sessions", json={"dataset_path": str(toy_dataset_path)}
        ).json()["session_id"]
        resp = client.post(f"/sessions/{sid}/track", params={"from": 0, "steps": 3})
        assert resp.status_code == 200
        assert resp.json()["frame"] == 3

    def test_track_past_last_frame_is_404(self, client, track_path):
        sid = client.post("/sessions", json={"dataset_path": str(track_path)}).json()[
            "session_id"
        ]
        assert (
            client.post(f"/sessions/{sid}/track", params={"from": 1}).status_code
            == 404
        )


class TestExport:
    @pytest.fixture()
    def labeled_path(self, tmp_path):
        # One scan: beams 10..14 at 2.0 m inside the single circle, beams
        # 100..106 at 5.0 m outside it, everything else invalid.
        inside = slice(10, 15)
        angles = FROG_META.angles
        pts = np.stack(
            [2.0 * np.cos(angles[inside]), 2.0 * np.sin(angles[inside])], axis=1
        )
        c = pts.mean(axis=0)
        ds = _crafted_dataset(
            scan_ranges=[[(inside, 2.0), (slice(100, 107), 5.0)]],
            circle_rows_per_scan=[[_circle_row(c[0], c[1], 0.3)]],
        )
        path = tmp_path / "labeled.h5"
        save_dataset(ds, path)
        return path

    def test_json_point_classes(self, client, labeled_path):
        sid = client.post(
            "/sessions", json={"dataset_path": str(labeled_path)}
        ).json()["session_id"]
        resp = client.post(f"/sessions/{sid}/export", params={"format": "json"})
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["schema_version"] == EXPORT_SCHEMA_VERSION
        classes = doc["point_classes"]["0"]
        assert len(classes) == FROG_META.num_points
        expected = [1 if 10 <= i < 15 else 0 for i in range(FROG_META.num_points)]
        assert classes == expected

    def test_json_and_csv_agree_through_import(
        self, client, session_id, tmp_path
    ):
        json_path = tmp_path / "ann.json"
        csv_path = tmp_path / "ann.csv"
        json_path.write_text(
            client.post(
                f"/sessions/{session_id}/export", params={"format": "json"}
            ).text
        )
        csv_path.write_text(
            client.post(
                f"/sessions/{session_id}/export", params={"format": "csv"}
            ).text
        )
        from_json = import_annotations(json_path)
        from_csv = import_annotations(csv_path)
        assert len(from_json) == len(from_csv) > 0
        for a, b in zip(from_json, from_csv):
            assert a["scan_index"] == b["scan_index"]
            assert a["person_id"] == b["person_id"]
            for key in ("timestamp", "x", "y", "radius"):
                assert a[key] == pytest.approx(b[key])

    def test_export_reflects_edits(self, client, session_id, tmp_path):
        added = client.post(
            f"/sessions/{session_id}/frames/7/circles",
            json={"action": "add", "x": 1.5, "y": 2.5, "radius": 0.35},
        ).json()
        path = tmp_path / "edited.json"
        path.write_text(
            client.post(
                f"/sessions/{session_id}/export", params={"format": "json"}
            ).text
        )
        records = [
            r
            for r in import_annotations(path)
            if r["person_id"] == added["person_id"]
        ]
        assert len(records) == 1
        assert records[0]["scan_index"] == 7
        assert records[0]["x"] == pytest.approx(1.5)

    def test_unknown_format_is_400(self, client, session_id):
        resp = client.post(
            f"/sessions/{session_id}/export", params={"format": "xml"}
        )
        assert resp.status_code == 404 or resp.status_code == 400


class TestSidecar:
    def test_save_roundtrip_fields(self, client, session_id, tmp_path):
        path = tmp_path / "sidecar.json"
        resp = client.post(
            f"/sessions/{session_id}/save", json={"path": str(path)}
        )
        assert resp.status_code == 200
        assert resp.json() == {"saved": str(path)}
        doc = json.loads(path.read_text())
        assert doc["schema_version"] == API_SCHEMA_VERSION
        n = sum(len(circles) for circles in doc["frames"].values())
        assert n > 0
        assert doc["next_person_id"] >= n

    def test_save_to_bad_path_is_400(self, client, session_id, tmp_path):
        resp = client.post(
            f"/sessions/{session_id}/save",
            json={"path": str(tmp_path / "missing_dir" / "x.json")},
        )
        assert resp.status_code == 400


class TestTrackingFollowsSimulatedPerson:
    def _walking_person_dataset(self, tmp_path, n_frames=121):
        """One person crossing an empty arena at 2 m/s = 0.05 m per frame."""
        from scandet.simulate import PersonState, World, render_scan, step_world

        x0, x1, y0, y1 = -1.0, 9.0, -6.0, 6.0
        segments = np.array(
            [[x0, y0, x1, y0], [x1, y0, x1, y1], [x1, y1, x0, y1], [x0, y1, x0, y0]]
        )
        world = World(
            segments=segments,
            pillars=np.zeros((0, 3)),
            people=(
                PersonState(
                    x=8.0, y=0.5, heading=np.pi, speed=2.0,
                    leg_separation=0.3, leg_radius=0.06, gait_phase=0.0,
                    person_id=0,
                ),
            ),
            bounds=(x0, x1, y0, y1),
            rng_seed=0,
        )
        rng = np.random.default_rng(3)
        dt = 1.0 / FROG_META.frequency
        scans = np.empty((n_frames, FROG_META.num_points), dtype=np.float32)
        rows, circle_num, centers = [], [], []
        for k in range(n_frames):
            scan, gt = render_scan(world, rng=rng, timestamp=k * dt)
            assert len(gt) == 1
            scans[k] = np.where(np.isfinite(scan.ranges), scan.ranges, 60.0)
            c = gt[0]
            rows.append([c.x, c.y, c.radius, c.angle, c.distance, c.half_angle])
            circle_num.append(1)
            centers.append((world.people[0].x, world.people[0].y))
            world = step_world(world, dt)
        circle_num = np.asarray(circle_num, dtype=np.uint32)
        circle_idx = np.zeros(n_frames, dtype=np.uint32)
        circle_idx[1:] = np.cumsum(circle_num)[:-1]
        ds = Dataset(
            scans=scans,
            timestamps=np.arange(n_frames, dtype=np.float64) * dt,
            circles=np.asarray(rows, dtype=np.float32),
            circle_idx=circle_idx,
            circle_num=circle_num,
            split=np.zeros(n_frames, dtype=np.uint8),
            meta=FROG_META,
        )
        path = tmp_path / "walk.h5"
        save_dataset(ds, path)
        return path, centers

    def test_follows_within_tenth_meter_for_100_frames(self, client, tmp_path):
        path, centers = self._walking_person_dataset(tmp_path)
        sid = client.post("/sessions", json={"dataset_path": str(path)}).json()[
            "session_id"
        ]
        for k in range(len(centers) - 1):
            resp = client.post(f"/sessions/{sid}/track", params={"from": k})
            assert resp.status_code == 200
            (circle,) = resp.json()["circles"]
            assert circle["lost"] is False, f"lost at frame {k + 1}"
            gx, gy = centers[k + 1]
            err = float(np.hypot(circle["x"] - gx, circle["y"] - gy))
            assert err <= 0.1, f"drift {err:.3f} m at frame {k + 1}"


def test_points_match_dataset(client, session_id, toy_dataset):
    from scandet.dataset import scan_with_annotations

    scan, _ = scan_with_annotations(toy_dataset, 5)
    points, valid = polar_to_cartesian(scan)
    got = client.get(f"/sessions/{session_id}/frames/5").json()["points"]
    np.testing.assert_allclose(np.asarray(got), points[valid], atol=1e-12)
