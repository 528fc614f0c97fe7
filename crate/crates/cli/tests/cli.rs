//! End-to-end runs of the `pinlab` binary.
//!
//! Golden files under `tests/golden/` pin the exact bytes of every output
//! table for the grid in `grid.conf`. Regenerate them with `UPDATE_GOLDEN=1`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pinlab_cli::config::{parse_config, parse_unvalidated, serialize, Command as Sub, KernelSpec, RunConfig};
use proptest::prelude::*;

const OUTPUTS: &[(&str, &[&str])] = &[
    ("green", &["green.csv"]),
    ("annealed", &["annealed.csv", "annealed_fit.csv"]),
    ("quenched", &["quenched.csv"]),
    ("lowtemp", &["lowtemp.csv"]),
    ("smoothing", &["smoothing.csv", "smoothing_contact.csv"]),
    ("sandwich", &["sandwich.csv"]),
    ("renewal-mc", &["renewal_mc.csv", "renewal_mc.json"]),
];

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn pinlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinlab"))
        .args(args)
        .env_remove("PINLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn run_grid(command: &str, out: &Path) -> Output {
    let conf = golden_dir().join("grid.conf");
    pinlab(&[
        command,
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn every_subcommand_matches_its_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let tmp = tempfile::tempdir().unwrap();
    for (command, files) in OUTPUTS {
        let dir = tmp.path().join(command);
        let o = run_grid(command, &dir);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{command}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        for f in *files {
            let got = fs::read_to_string(dir.join(f)).unwrap();
            let golden = golden_dir().join(f);
            if update {
                fs::write(&golden, &got).unwrap();
            } else {
                let want = fs::read_to_string(&golden).unwrap_or_else(|_| panic!("missing golden {f}"));
                assert_eq!(got, want, "{command}: {f} differs from golden");
            }
        }
        assert!(dir.join("manifest.json").exists());
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for command in ["quenched", "renewal-mc"] {
        let (a, b) = (
            tmp.path().join(format!("{command}-a")),
            tmp.path().join(format!("{command}-b")),
        );
        assert_eq!(run_grid(command, &a).status.code(), Some(0));
        assert_eq!(run_grid(command, &b).status.code(), Some(0));
        let files = OUTPUTS.iter().find(|(c, _)| *c == command).unwrap().1;
        for f in files {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
        }
    }
}

#[test]
fn green_in_three_dimensions_is_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("c.conf");
    fs::write(&conf, "d = 3\n").unwrap();
    let out = tmp.path().join("out");
    let o = pinlab(&[
        "green",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let mut r = csv::Reader::from_path(out.join("green.csv")).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["run_id", "d", "G", "G_error", "beta_c", "G_watson"]
    );
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    let g: f64 = rows[0][2].parse().unwrap();
    assert!((g - 1.51639).abs() < 5e-6, "{g}");
}

#[test]
fn manifest_hashes_the_files_it_lists() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("s");
    assert_eq!(run_grid("sandwich", &dir).status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "ok");
    assert_eq!(m["run_id"], "sandwich-s7");
    let files = m["files"].as_array().unwrap();
    assert_eq!(files.len(), 1);
    let bytes = fs::read(dir.join("sandwich.csv")).unwrap();
    assert_eq!(files[0]["sha256"], pinlab_cli::output::sha256_hex(&bytes));
    // the echoed config reproduces the run
    let echoed = parse_config(m["config"].as_str().unwrap(), None).unwrap();
    assert_eq!(echoed.seed, 7);
    assert_eq!(echoed.beta, vec![1.0, 5.0]);
}

#[test]
fn invalid_config_exits_two_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("bad.conf");
    fs::write(&conf, "rho = -1\nbogus = 2\nbeta = 3, 1\n").unwrap();
    let out = tmp.path().join("out");
    let o = pinlab(&[
        "sandwich",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for needle in ["line 1: rho", "line 2: bogus", "line 3: beta"] {
        assert!(err.contains(needle), "missing `{needle}` in {err}");
    }
    assert!(!out.exists());

    let o = pinlab(&["sandwich", "--tolerance", "-1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = pinlab(&[
        "sandwich",
        "--config",
        "/nonexistent/x.conf",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn failed_cell_exits_one_and_still_writes() {
    // renewal sampling needs a supercritical coupling: beta = 0.5 < beta_c in d = 3
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("c.conf");
    fs::write(&conf, "d = 3\nbeta = 0.5, 1\nt = 1\nn = 200\n").unwrap();
    let out = tmp.path().join("out");
    let o = pinlab(&[
        "renewal-mc",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let summary: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(summary["failed_cells"][0]["cell"], "beta=0.5 t=1");
    let text = fs::read_to_string(out.join("renewal_mc.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "failed");
}

#[test]
fn seed_flag_overrides_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = golden_dir().join("grid.conf");
    let out = tmp.path().join("q");
    let o = pinlab(&[
        "quenched",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "8",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(out.join("quenched.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("quenched-s8,8,"));
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6f64..1e6, 1e-12f64..1e-3, Just(0.0)]
}

fn ascending(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3f64..100.0, 1..max).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    })
}

fn kernel() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        Just(KernelSpec::Simple),
        prop::collection::vec((prop::collection::vec(-3i64..=3, 1..3), 1e-3f64..1.0), 1..4)
            .prop_map(KernelSpec::Entries),
    ]
}

prop_compose! {
    fn any_config()(
        command in prop::sample::select(Sub::ALL.to_vec()),
        dim in 1usize..=8,
        kernel in kernel(),
        rho in finite(),
        beta in ascending(5),
        t in ascending(5),
        n in 0usize..10_000,
        seed in any::<u64>(),
        tolerance in finite(),
        series_tol in finite(),
        max_radius in prop::option::of(0usize..100),
        contact_t in ascending(3),
        window in (finite(), finite()),
        threads in prop::option::of(1usize..64),
        out in prop::option::of("[a-z][a-z0-9_/]{0,12}"),
    ) -> RunConfig {
        RunConfig {
            command: Some(command),
            dim,
            kernel,
            rho,
            beta,
            t,
            n,
            seed,
            tolerance,
            series_tol,
            max_radius,
            contact_t,
            window,
            threads,
            out: out.map(PathBuf::from),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn serialize_then_parse_round_trips(cfg in any_config()) {
        let text = serialize(&cfg);
        let back = parse_unvalidated(&text, None);
        prop_assert!(back.is_ok(), "{:?}\n{}", back, text);
        prop_assert_eq!(back.unwrap(), cfg);
    }

    #[test]
    fn valid_configs_round_trip_exactly(beta in ascending(4), t in ascending(4), rho in 0.0f64..5.0, seed in any::<u64>()) {
        let cfg = parse_config(
            &format!(
                "command = quenched\nrho = {rho}\nbeta = {}\nt = {}\nseed = {seed}\n",
                beta.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
                t.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            ),
            None,
        )
        .unwrap();
        prop_assert_eq!(parse_config(&serialize(&cfg), None).unwrap(), cfg);
    }
}
