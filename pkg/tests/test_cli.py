import csv
import json
import shutil
import subprocess

import numpy as np
import pytest

from wmdld.audio import AudioBuffer, read_wav, write_wav
from wmdld.cli import main, parse_angles, UsageError
from wmdld.evaluation import ANGLES_3X5, burst_sources
from wmdld.sparsify import peak_to_valley_ratio

from helpers import ANGLES_2X4


def angle_arg(rows):
    return ";".join(",".join(f"{a:g}" for a in r) for r in rows)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    for name, L in (("four", 4), ("five", 5)):
        (d / name).mkdir()
        for i, s in enumerate(burst_sources(L, 3.0, 16000, seed=L)):
            write_wav(s, d / name / f"src{i + 1}.wav", "float32")
    assert main(["mix", "--sources", *map(str, sorted((d / "four").glob("*.wav"))),
                 "--angles", angle_arg([ANGLES_2X4]), "--out", str(d / "mix4.wav")]) == 0
    return d


def test_parse_angles():
    assert parse_angles("0,-87 ; 85,0") == [[0.0, -87.0], [85.0, 0.0]]
    with pytest.raises(UsageError):
        parse_angles("a,b")


class TestMix:
    def test_stereo(self, workdir):
        x = read_wav(workdir / "mix4.wav")
        assert x.channels == 2 and x.n_samples == 48000
        side = json.loads((workdir / "mix4.json").read_text())
        assert side["K"] == 2 and side["L"] == 4 and len(side["matrix"]) == 2

    def test_three_channel(self, workdir, tmp_path):
        srcs = sorted((workdir / "five").glob("*.wav"))
        out = tmp_path / "mix5.wav"
        assert main(["mix", "--sources", *map(str, srcs), "--angles", angle_arg(ANGLES_3X5),
                     "--out", str(out)]) == 0
        assert read_wav(out).channels == 3

    def test_arity(self, workdir, tmp_path, capsys):
        srcs = sorted((workdir / "four").glob("*.wav"))
        code = main(["mix", "--sources", *map(str, srcs), "--angles", "10,20,30",
                     "--out", str(tmp_path / "m.wav")])
        assert code == 2 and "4 values" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        code = main(["mix", "--sources", str(tmp_path / "nope.wav"), "--angles", "10",
                     "--out", str(tmp_path / "m.wav")])
        assert code == 1


class TestSeparate:
    def test_defaults_and_determinism(self, workdir, tmp_path):
        runs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["separate", "--input", str(workdir / "mix4.wav"), "--num-sources", "4",
                         "--seed", "3", "--out-dir", str(out)]) == 0
            runs.append(out)
        files = sorted(p.name for p in runs[0].iterdir())
        assert files == ["assignment.json", "config.json", "model.json", "source_01.wav",
                         "source_02.wav", "source_03.wav", "source_04.wav"]
        for f in files:
            assert (runs[0] / f).read_bytes() == (runs[1] / f).read_bytes()
        cfg = json.loads((runs[0] / "config.json").read_text())
        assert cfg["q"] == 2 and cfg["frame_ms"] == 32.0 and cfg["conf_threshold"] == 300
        assert cfg["mode"] == "wmdld"

    def test_rerun_from_config(self, workdir, tmp_path):
        first = tmp_path / "first"
        assert main(["separate", "--input", str(workdir / "mix4.wav"), "--num-sources", "4",
                     "--mode", "mdld", "--q", "3", "--out-dir", str(first)]) == 0
        again = tmp_path / "again"
        assert main(["separate", "--config", str(first / "config.json"),
                     "--out-dir", str(again)]) == 0
        assert (first / "model.json").read_bytes() == (again / "model.json").read_bytes()
        assert json.loads((again / "model.json").read_text())["mode"] == "unweighted"

    def test_missing_num_sources(self, workdir, tmp_path):
        assert main(["separate", "--input", str(workdir / "mix4.wav"),
                     "--out-dir", str(tmp_path)]) == 2

    def test_mono_input(self, workdir, tmp_path):
        src = next((workdir / "four").glob("*.wav"))
        assert main(["separate", "--input", str(src), "--num-sources", "2",
                     "--out-dir", str(tmp_path)]) == 2

    def test_bad_file(self, tmp_path):
        bad = tmp_path / "bad.wav"
        bad.write_bytes(b"RIFF....junk")
        assert main(["separate", "--input", str(bad), "--num-sources", "2",
                     "--out-dir", str(tmp_path / "o")]) == 1


class TestEvaluate:
    @pytest.fixture
    def dirs(self, tmp_path):
        rng = np.random.default_rng(0)
        ref, est = tmp_path / "ref", tmp_path / "est"
        ref.mkdir()
        est.mkdir()
        S = rng.standard_normal((3, 4000)) * 0.2
        for i, s in enumerate(S):
            write_wav(AudioBuffer(s, 16000), ref / f"s{i}.wav", "float32")
        return ref, est, S

    def test_perfect(self, dirs, tmp_path):
        ref, est, S = dirs
        for f in ref.iterdir():
            shutil.copy(f, est / f.name)
        assert main(["evaluate", "--estimates", str(est), "--references", str(ref),
                     "--report", str(tmp_path / "r.json")]) == 0
        report = json.loads((tmp_path / "r.json").read_text())
        assert all(report["averages"][k] == 100.0 for k in ("sdr", "sir", "sar"))
        assert (tmp_path / "r.csv").exists()

    def test_shuffled(self, dirs, tmp_path):
        ref, est, S = dirs
        for i, j in enumerate([2, 0, 1]):
            write_wav(AudioBuffer(S[j] + 0.01 * np.sin(np.arange(4000) * (i + 1)), 16000),
                      est / f"e{i}.wav", "float32")
        assert main(["evaluate", "--estimates", str(est), "--references", str(ref),
                     "--report", str(tmp_path / "r.json")]) == 0
        assert json.loads((tmp_path / "r.json").read_text())["permutation"] == [2, 0, 1]

    def test_count_mismatch(self, dirs, tmp_path):
        ref, est, S = dirs
        write_wav(AudioBuffer(S[0], 16000), est / "e.wav", "float32")
        assert main(["evaluate", "--estimates", str(est), "--references", str(ref),
                     "--report", str(tmp_path / "r.json")]) == 2

    def test_length_mismatch(self, dirs, tmp_path):
        ref, est, S = dirs
        for i in range(3):
            write_wav(AudioBuffer(S[i][:3000], 16000), est / f"e{i}.wav", "float32")
        assert main(["evaluate", "--estimates", str(est), "--references", str(ref),
                     "--report", str(tmp_path / "r.json")]) == 2


class TestHist:
    def read(self, path):
        with open(path) as fh:
            rows = list(csv.reader(fh))
        return rows[0], np.array([[float(a), int(b)] for a, b in rows[1:]])

    def test_confidence_vs_norm(self, workdir, tmp_path):
        assert main(["hist", "--input", str(workdir / "mix4.wav"), "--bins", "180",
                     "--out", str(tmp_path / "c.csv"), "--scatter", str(tmp_path / "s.csv")]) == 0
        assert main(["hist", "--input", str(workdir / "mix4.wav"), "--bins", "180",
                     "--method", "norm", "--out", str(tmp_path / "n.csv")]) == 0
        header, conf = self.read(tmp_path / "c.csv")
        _, norm = self.read(tmp_path / "n.csv")
        assert header == ["angle_deg", "count"] and len(conf) == 180
        # the two methods keep (nearly) the same number of points
        assert abs(conf[:, 1].sum() - norm[:, 1].sum()) <= 2
        assert peak_to_valley_ratio(conf[:, 1], 4) > peak_to_valley_ratio(norm[:, 1], 4)
        peaks = []
        for i in np.argsort(conf[:, 1], kind="stable")[::-1]:
            if all(abs(conf[i, 0] - p) > 5 for p in peaks):
                peaks.append(conf[i, 0])
            if len(peaks) == 4:
                break
        np.testing.assert_allclose(np.sort(peaks), ANGLES_2X4, atol=1.0)
        assert (tmp_path / "s.csv").read_text().startswith("x1,x2\n")

    def test_three_channels(self, workdir, tmp_path):
        srcs = sorted((workdir / "five").glob("*.wav"))
        mix = tmp_path / "m3.wav"
        main(["mix", "--sources", *map(str, srcs), "--angles", angle_arg(ANGLES_3X5),
              "--out", str(mix)])
        assert main(["hist", "--input", str(mix), "--out", str(tmp_path / "h.csv")]) == 2


def test_usage_and_version(capsys):
    assert main([]) == 2
    assert main(["--version"]) == 0
    assert "0.1.0" in capsys.readouterr().out


def test_console_script(tmp_path):
    exe = shutil.which("wmdld")
    if exe is None:
        pytest.skip("console script not installed")
    out = subprocess.run([exe, "evaluate", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "--references" in out.stdout
