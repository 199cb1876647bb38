//! End-to-end runs of the command-line stages.

use std::fs;
use std::path::Path;

use dmri::cli::run;
use dmri::io::{self, sha256_file, Cxt1};
use dmri::numerics::{truncated_svd, CasoratiMatrix, ComplexTensor};

fn dmri(args: &[&str]) -> i32 {
    run(std::iter::once("dmri").chain(args.iter().copied()))
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn small_phantom(dir: &Path) {
    let d = dir.to_str().unwrap();
    assert_eq!(dmri(&["phantom", "--out-dir", d, "--height", "32", "--width", "32", "--frames", "30"]), 0);
}

#[test]
fn phantom_shapes_and_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        assert_eq!(dmri(&["phantom", "--out-dir", dir.path().to_str().unwrap(), "--frames", "100"]), 0);
    }
    let x = Cxt1::read(&a.path().join("phantom.cxt1")).unwrap();
    assert_eq!(x.dims, vec![16384, 100]);
    for f in ["phantom.cxt1", "coils.cxt1"] {
        assert_eq!(
            sha256_file(&a.path().join(f)).unwrap(),
            sha256_file(&b.path().join(f)).unwrap()
        );
    }
    assert!(a.path().join("manifest-phantom.json").exists());

    let img = p(a.path(), "f0.pgm");
    assert_eq!(dmri(&["render", "--input", &p(a.path(), "phantom.cxt1"), "--frame", "0", "--out", &img]), 0);
    let bytes = fs::read(&img).unwrap();
    let header = b"P5\n128 128\n255\n";
    assert!(bytes.starts_with(header));
    assert_eq!(bytes.len(), header.len() + 128 * 128);
    assert_eq!(bytes[header.len()..].iter().max(), Some(&255));
    assert!(Path::new(&format!("{img}.txt")).exists());
}

#[test]
fn acquisition_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        small_phantom(dir.path());
        let code = dmri(&[
            "acquire",
            "--phantom",
            &p(dir.path(), "phantom.cxt1"),
            "--coils",
            &p(dir.path(), "coils.cxt1"),
            "--out-dir",
            dir.path().to_str().unwrap(),
            "--noise",
            "0",
        ]);
        assert_eq!(code, 0);
    }
    for f in ["kspace.cxt1", "navigators.cxt1", "virtual-coils.cxt1"] {
        assert_eq!(
            sha256_file(&a.path().join(f)).unwrap(),
            sha256_file(&b.path().join(f)).unwrap()
        );
    }
    let k = Cxt1::read(&a.path().join("kspace.cxt1")).unwrap();
    // [frames, coils, spokes, readout]
    assert_eq!(k.dims, vec![30, 4, 10, 64]);
    let z = Cxt1::read(&a.path().join("navigators.cxt1")).unwrap();
    assert_eq!(z.dims[1], 30);
}

fn rank5(x: &CasoratiMatrix) -> CasoratiMatrix {
    let full = ComplexTensor::new(vec![x.pixels(), x.frames()], x.data().to_vec()).unwrap();
    let svd = truncated_svd(&full, 5).unwrap();
    let mut us = svd.u.clone();
    for (k, v) in us.data_mut().iter_mut().enumerate() {
        *v *= svd.s[k % 5];
    }
    let low = us.matmul(&svd.v.adjoint().unwrap()).unwrap();
    CasoratiMatrix::from_tensor(low, x.height(), x.width()).unwrap()
}

#[test]
fn recon_eval_and_compare() {
    let t = tempfile::tempdir().unwrap();
    let dir = t.path();
    let d = dir.to_str().unwrap();
    assert_eq!(
        dmri(&["phantom", "--out-dir", d, "--height", "32", "--width", "32", "--frames", "30", "--coils", "4"]),
        0
    );
    // Rank-5 version of the phantom, so the subspace model is exact.
    let truth: CasoratiMatrix = io::load(&dir.join("phantom.cxt1")).unwrap();
    io::save(&dir.join("rank5.cxt1"), &rank5(&truth)).unwrap();
    let acq = [
        "acquire",
        "--phantom",
        &p(dir, "rank5.cxt1"),
        "--coils",
        &p(dir, "coils.cxt1"),
        "--out-dir",
        d,
        "--noise",
        "0",
        "--compress",
        "0",
    ];
    assert_eq!(dmri(&acq), 0);
    assert_eq!(
        dmri(&["basis", "--navigators", &p(dir, "navigators.cxt1"), "--rank", "5", "--out", &p(dir, "basis.cxt1")]),
        0
    );
    let recon = |method: &str, extra: &[&str], out: &str| {
        let ks = p(dir, "kspace.cxt1");
        let vc = p(dir, "coils.cxt1");
        let bs = p(dir, "basis.cxt1");
        let o = p(dir, out);
        let mut args = vec!["recon", "--kspace", &ks, "--coils", &vc, "--basis", &bs, "--method", method, "--out", &o];
        args.extend_from_slice(extra);
        dmri(&args)
    };
    assert_eq!(recon("subspace", &["--cg-iters", "200", "--cg-tol", "1e-10"], "sub.cxt1"), 0);
    assert_eq!(
        recon("penalized-subspace", &["--lambda", "1e6", "--cg-iters", "200", "--cg-tol", "1e-10"], "pen.cxt1"),
        0
    );
    assert!(dir.join("sub-trace.csv").exists());
    assert_eq!(dmri(&["compare", &p(dir, "pen.cxt1"), &p(dir, "sub.cxt1"), "--tol", "1e-3"]), 0);
    assert_eq!(dmri(&["compare", &p(dir, "phantom.cxt1"), &p(dir, "sub.cxt1"), "--tol", "1e-6"]), 1);

    // Evaluating the phantom against itself hits the SER cap and SSIM 1.
    let copy = p(dir, "copy.cxt1");
    fs::copy(dir.join("phantom.cxt1"), &copy).unwrap();
    let csv = p(dir, "metrics.csv");
    assert_eq!(dmri(&["eval", "--recon", &copy, "--reference", &p(dir, "phantom.cxt1"), "--out", &csv]), 0);
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("frame,ser_db,ssim,hfen"));
    for line in lines.take(30) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1].parse::<f64>().unwrap(), 300.0);
        assert_eq!(cols[2].parse::<f64>().unwrap(), 1.0);
    }

    let x: CasoratiMatrix = io::load(&dir.join("sub.cxt1")).unwrap();
    assert_eq!((x.height(), x.width(), x.frames()), (32, 32, 30));
}

#[test]
fn config_file_supplies_defaults() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("run.cfg");
    fs::write(&cfg, "# small run\nheight = 24\nwidth=20\nframes=12\n").unwrap();
    let d = t.path().to_str().unwrap();
    assert_eq!(dmri(&["--config", cfg.to_str().unwrap(), "phantom", "--out-dir", d, "--frames", "7"]), 0);
    let x = Cxt1::read(&t.path().join("phantom.cxt1")).unwrap();
    // The explicit flag wins over the file.
    assert_eq!(x.dims, vec![24 * 20, 7]);
}

#[test]
fn exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().to_str().unwrap();
    assert_eq!(dmri(&["eval", "--recon", "missing.cxt1", "--reference", "missing.cxt1"]), 2);
    assert_eq!(dmri(&["phantom", "--out-dir", d, "--frames", "0"]), 2);
    assert_eq!(dmri(&["no-such-command"]), 2);
    assert_eq!(dmri(&["render", "--input", "x.cxt1", "--out", "y.pgm"]), 2);

    // A wildly large step size makes training blow up: a numerical failure.
    small_phantom(t.path());
    let acq = ["acquire", "--phantom", &p(t.path(), "phantom.cxt1"), "--coils", &p(t.path(), "coils.cxt1"), "--out-dir", d];
    assert_eq!(dmri(&acq), 0);
    let code = dmri(&[
        "train-dae",
        "--navigators",
        &p(t.path(), "navigators.cxt1"),
        "--learning-rate",
        "1e300",
        "--epochs",
        "50",
        "--out",
        &p(t.path(), "dae.cxt1"),
    ]);
    assert_eq!(code, 3);
}
