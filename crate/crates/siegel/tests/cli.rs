use std::fs;
use std::path::Path;
use std::process::Command;

fn run(dir: &Path, args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_siegel"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn approximants_and_manifest_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let a = d.path().join("a");
    assert_eq!(run(&a, &["approximants", "--alpha", "golden", "--k", "10"]), 0);
    let csv = fs::read_to_string(a.join("approximants.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.ends_with("10,1,55,89\n"));
    let b = d.path().join("b");
    let m = a.join("manifest.json");
    assert_eq!(run(&b, &["approximants", "--config", m.to_str().unwrap()]), 0);
    assert_eq!(fs::read(b.join("approximants.csv")).unwrap(), csv.as_bytes());
}

#[test]
fn setup_check_and_strict_config() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), &["setup", "--n", "4", "--An", "10", "--check"]), 0);
    let cfg = d.path().join("bad.cfg");
    fs::write(&cfg, "n = 4\nAN = 10\n").unwrap();
    assert_eq!(run(d.path(), &["setup", "--config", cfg.to_str().unwrap()]), 1);
    assert_eq!(run(d.path(), &["setup", "--n", "zero"]), 1);
    assert_eq!(run(d.path(), &["setup", "--bogus", "1"]), 1);
}

#[test]
fn density_config_and_check_mode() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("exp.cfg");
    fs::write(&cfg, "# golden surrogate\nalpha = golden\ntheta = golden\nn = 4,5,6\nAn_base = 2\nsamples = 20000\nseed = 1\n")
        .unwrap();
    let out = d.path().join("run");
    assert_eq!(run(&out, &["density", "--config", cfg.to_str().unwrap()]), 0);
    let csv = fs::read_to_string(out.join("density.csv")).unwrap();
    assert!(csv.starts_with("n,q_n,A_n,epsilon_n,r7,r8,dens_Yn,stderr_Yn,dens_Dn,stderr_Dn,budget_T,samples,seed\n"));
    // the half-density check fails at these n, and nothing is written
    let checked = d.path().join("checked");
    assert_eq!(run(&checked, &["density", "--config", cfg.to_str().unwrap(), "--check"]), 3);
    assert!(!checked.exists());
    // orbit path with too small a budget is refused
    assert_eq!(run(&out, &["density", "--n", "4", "--samples", "10", "--orbit", "true", "--budget", "5"]), 1);
}

#[test]
fn numerical_failure_exit_code() {
    let d = tempfile::tempdir().unwrap();
    // 64 bits cannot hold the cancellation in α_n − p_n/q_n at A_n = 10^30
    assert_eq!(run(d.path(), &["setup", "--n", "8", "--An", "10^30", "--precision", "64"]), 2);
}

fn mask_file(dir: &Path, bit: char) -> std::path::PathBuf {
    let p = dir.join(format!("m{bit}.txt"));
    let row: String = std::iter::repeat_n(bit, 4).collect();
    fs::write(&p, format!("mask 4 3 0 0 1 1 10 test\n{row}\n{row}\n{row}\n")).unwrap();
    p
}

#[test]
fn render_masks() {
    let d = tempfile::tempdir().unwrap();
    for (bit, v) in [('0', 0u8), ('1', 255u8)] {
        let m = mask_file(d.path(), bit);
        assert_eq!(run(d.path(), &["render", "--mask", m.to_str().unwrap(), "--image", "x.ppm"]), 0);
        let img = fs::read(d.path().join("x.ppm")).unwrap();
        let body = &img[img.len() - 36..];
        assert!(img.starts_with(b"P6\n4 3\n255\n") && body.iter().all(|&b| b == v));
        assert!(fs::read_to_string(d.path().join("x.ppm.txt")).unwrap().contains("half widths 1 1"));
    }
    let bad = d.path().join("bad.txt");
    fs::write(&bad, "mask 4 3 0 0 1 1 10 test\n0101\n").unwrap();
    assert_eq!(run(d.path(), &["render", "--mask", bad.to_str().unwrap()]), 1);
}

#[test]
fn render_golden_mask_counts() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), &["render", "--resolution", "96", "--budget", "2000"]), 0);
    let text = fs::read_to_string(d.path().join("mask.txt")).unwrap();
    let inside = text.lines().skip(1).flat_map(|l| l.chars()).filter(|&c| c == '1').count();
    let img = fs::read(d.path().join("mask.ppm")).unwrap();
    let white = img[img.len() - 3 * 96 * 96..].chunks(3).filter(|c| c[0] == 255).count();
    assert_eq!(inside, white);
    assert!(inside > 0);
}
