import csv
import json

import numpy as np
import pytest

from plc_lab.audio_io import PACKET_SIZE, Waveform, read_wav, write_wav
from plc_lab.cli import main
from plc_lab.degrade import apply_zero_fill
from plc_lab.trace_model import parse_trace

RATE = 44100


def tone_clip(packets=12, freq=440.0, amp=0.5):
    t = np.arange(packets * PACKET_SIZE) / RATE
    return Waveform(amp * np.sin(2 * np.pi * freq * t), RATE)


@pytest.fixture
def workspace(tmp_path):
    clean_dir = tmp_path / "clean"
    traces_dir = tmp_path / "traces"
    clean_dir.mkdir()
    traces_dir.mkdir()
    for i in range(3):
        write_wav(tone_clip(freq=330 + 110 * i), clean_dir / f"clip{i}.wav")
    traces_dir.joinpath("t1.txt").write_text("010010100100\n")
    traces_dir.joinpath("t2.txt").write_text("001100000010\n")
    traces_dir.joinpath("burst9.txt").write_text("011111111100\n")
    return tmp_path


class TestDispatch:
    def test_usage_error_exit_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["bogus-command"])
        assert exc.value.code == 2

    def test_domain_error_exit_1(self, tmp_path, capsys):
        rc = main(["conceal", "--in", str(tmp_path / "missing.wav"),
                   "--trace", "x", "--out", "y"])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        assert "plc-lab" in out and "manifest=1" in out

    def test_effective_config_echoed(self, workspace, capsys):
        rc = main(["traces", "--traces", str(workspace / "traces")])
        assert rc == 0
        err = capsys.readouterr().err
        assert "plc-lab traces config:" in err
        assert "seed=0" in err


class TestTraces:
    def test_classification_listing(self, workspace, capsys):
        assert main(["traces", "--traces", str(workspace / "traces")]) == 0
        out = capsys.readouterr().out
        assert "t1: packets=12" in out
        assert "subset=Subset2" in out  # burst9 has a 9-burst
        assert "Subset1=2" in out


class TestDegradeConcealEval:
    def test_pipeline(self, workspace, capsys):
        corpus = workspace / "corpus"
        rc = main(["degrade", "--clean", str(workspace / "clean"),
                   "--traces", str(workspace / "traces"),
                   "--out", str(corpus), "--seed", "5"])
        assert rc == 0
        manifest = corpus / "manifest.csv"
        rows = list(csv.DictReader(open(manifest)))
        assert len(rows) == 3

        clip = rows[0]["clip_id"]
        enhanced = workspace / "fixed.wav"
        rc = main(["conceal", "--in", str(corpus / "lossy" / f"{clip}.wav"),
                   "--trace", str(corpus / "traces" / f"{clip}.txt"),
                   "--method", "ar", "--out", str(enhanced)])
        assert rc == 0
        out_w = read_wav(enhanced)
        lossy_w = read_wav(corpus / "lossy" / f"{clip}.wav")
        assert len(out_w) == len(lossy_w)

        per_clip = workspace / "per_clip.csv"
        summary = workspace / "summary.csv"
        rc = main(["eval", "--manifest", str(manifest), "--method", "zero", "--method", "ar",
                   "--out", str(per_clip), "--summary", str(summary)])
        assert rc == 0
        rows = list(csv.DictReader(open(per_clip)))
        assert len(rows) == 6  # 3 clips x 2 systems
        assert {r["system"] for r in rows} == {"zero", "ar"}
        table = capsys.readouterr().out
        assert "| system |" in table.replace("system ", "system ")

    def test_eval_directory_mode(self, workspace, tmp_path):
        refs = workspace / "clean"
        est = tmp_path / "est"
        est.mkdir()
        for p in refs.glob("*.wav"):
            w = read_wav(p)
            lossy = apply_zero_fill(w, parse_trace("010010100100"))
            write_wav(lossy.audio, est / p.name)
        out = tmp_path / "per_clip.csv"
        rc = main(["eval", "--ref", str(refs), "--est", str(est), "--out", str(out)])
        assert rc == 0
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 3
        assert all(float(r["mse"]) > 0 for r in rows)

    def test_eval_needs_exactly_one_mode(self, workspace, capsys):
        assert main(["eval", "--out", "x.csv"]) == 1
        assert "input mode" in capsys.readouterr().err

    def test_seed_reproducibility(self, workspace, tmp_path):
        out1, out2 = tmp_path / "c1", tmp_path / "c2"
        for out in (out1, out2):
            assert main(["degrade", "--clean", str(workspace / "clean"),
                         "--traces", str(workspace / "traces"),
                         "--out", str(out), "--seed", "77"]) == 0
        assert (out1 / "manifest.csv").read_text() == (out2 / "manifest.csv").read_text()
        for p in sorted((out1 / "lossy").glob("*.wav")):
            assert p.read_bytes() == (out2 / "lossy" / p.name).read_bytes()


class TestConfigFile:
    def test_file_supplies_flags_and_flags_win(self, workspace, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            f"traces = {workspace / 'traces'}\n"
            "seed = 123  # comment\n"
        )
        rc = main(["traces", "--config", str(cfg)])
        assert rc == 0
        assert "seed=123" in capsys.readouterr().err

        rc = main(["traces", "--config", str(cfg), "--seed", "9"])
        assert rc == 0
        assert "seed=9" in capsys.readouterr().err

    def test_unknown_key_rejected(self, workspace, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("nonsense = 1\n")
        rc = main(["traces", "--config", str(cfg), "--traces", str(workspace / "traces")])
        assert rc == 1
        assert "no flag matches" in capsys.readouterr().err


class TestRank:
    def test_rank_from_csv(self, tmp_path, capsys):
        path = tmp_path / "ratings.csv"
        clips = [f"c{i}" for i in range(10)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["assessor_id", "trial_id", "condition", "score"])
            for clip_index, clip in enumerate(clips):
                scores = {"A": 50, "B": 45, "C": 30, "D": 20,
                          "__reference__": 100, "__anchor__": 10}
                scores["A" if clip_index else "B"] = 90
                for cond, score in scores.items():
                    writer.writerow(["ann", clip, cond, score])
        rc = main(["rank", "--ratings", str(path), "--out-dir", str(tmp_path / "report")])
        assert rc == 0
        out = capsys.readouterr().out
        assert out.splitlines()[1].split()[1] == "A"  # 9 wins
        ranking = (tmp_path / "report" / "ranking.csv").read_text().splitlines()
        assert ranking[1].startswith("1,A,9")


class TestMushraCommands:
    def test_build_and_report(self, tmp_path, capsys):
        w = Waveform(0.1 * np.ones(256), RATE)
        clips = [f"clip{i:02d}" for i in range(10)]
        systems = ["alpha", "bravo", "charlie", "delta"]
        refs, anchors = tmp_path / "refs", tmp_path / "anchors"
        sys_dirs = {s: tmp_path / "sys" / s for s in systems}
        for d in [refs, anchors, *sys_dirs.values()]:
            d.mkdir(parents=True)
            for clip in clips:
                write_wav(w, d / f"{clip}.wav")

        session_cfg = tmp_path / "session.json"
        args = ["mushra-build", "--refs", str(refs), "--anchors", str(anchors),
                "--clips", ",".join(clips), "--out", str(session_cfg), "--seed", "31"]
        for s in systems:
            args += ["--system", f"{s}={sys_dirs[s]}"]
        assert main(args) == 0
        cfg = json.loads(session_cfg.read_text())
        assert cfg["master_seed"] == 31 and len(cfg["clips"]) == 10

        # inject ratings through the service layer, then report
        from plc_lab.mushra import Rating, RatingStore
        from plc_lab.service import SessionService
        from plc_lab.cli import _session_config, _stimuli_from_config

        store_path = tmp_path / "ratings.jsonl"
        service = SessionService(
            stimuli=_stimuli_from_config(_session_config(session_cfg)),
            trial_clips=clips, systems=sorted(systems), master_seed=31,
            store=RatingStore(store_path),
        )
        session = service.session_for("ann")
        batch = [Rating("ann", t.trial_id, c.token, 66)
                 for t in session.trials for c in t.conditions]
        service.store.record_batch(batch, session)

        report_dir = tmp_path / "report"
        rc = main(["mushra-report", "--session", str(session_cfg),
                   "--store", str(store_path), "--out-dir", str(report_dir)])
        assert rc == 0
        assert (report_dir / "ratings.csv").exists()
        assert (report_dir / "ranking.csv").exists()
        assert (report_dir / "per_trial_means.csv").exists()

    def test_build_validates_cardinality(self, tmp_path, capsys):
        rc = main(["mushra-build", "--refs", str(tmp_path), "--anchors", str(tmp_path),
                   "--system", f"a={tmp_path}", "--clips", "c1,c2",
                   "--out", str(tmp_path / "s.json")])
        assert rc == 1


class TestExport:
    def test_resample_export(self, workspace, tmp_path):
        src = next((workspace / "clean").glob("*.wav"))
        out = tmp_path / "x48.wav"
        assert main(["export", "--in", str(src), "--rate", "48000", "--out", str(out)]) == 0
        w = read_wav(out)
        assert w.sample_rate == 48000
        assert len(w) == round(12 * PACKET_SIZE * 48000 / RATE)
