use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SZZ: &str = env!("CARGO_BIN_EXE_szz");

fn szz(args: &[&str]) -> Output {
    Command::new(SZZ).args(args).output().expect("szz runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = szz(args);
    assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn c_file(body: &str) -> String {
    format!("#include <x.h>\n\nint f(void)\n{{\n\tint a = 1, b = 2, ret;\n\n\t{body}\n\treturn ret;\n}}\n")
}

/// Four fixes in one history: a line rewritten after its culprit (`t`), a
/// culprit in another file (`x`), a plain hit (`s`) and an add-only fix
/// (`g`). `trailers` maps fix labels to `Fixes:` lines.
fn script(trailers: &BTreeMap<&str, String>) -> String {
    let file = |path: &str, content: &str| format!("write {path} <<EOF\n{content}EOF\n");
    let msg = |label: &str, subject: &str| match trailers.get(label) {
        Some(t) => format!("message <<MSG\n{subject}\n\n{t}\nMSG\n"),
        None => format!("message {subject}\n"),
    };
    let mut s = String::new();
    s += "commit base\nmessage import\n";
    s += &file("t.c", &c_file("ret = do_read(a);"));
    s += &file("a.c", "int f(void)\n{\n\treturn g();\n}\n");
    s += &file("b.c", "int g(void)\n{\n\treturn 1;\n}\n");
    s += &file("s.c", "int s(int v)\n{\n\treturn v + 1;\n}\n");
    s += &file("g.c", "void init(void)\n{\n\tsetup();\n}\n");
    s += "commit t_inducer\nmessage t: pass b\n";
    s += &file("t.c", &c_file("ret = do_read(a, b);"));
    s += "commit t_previous\nmessage t: flags\n";
    s += &file("t.c", &c_file("ret = do_read(a, b, 0);"));
    s += "commit x_inducer\nmessage b: return zero\n";
    s += &file("b.c", "int g(void)\n{\n\treturn 0;\n}\n");
    s += "commit s_inducer\nmessage s: add two\n";
    s += &file("s.c", "int s(int v)\n{\n\treturn v + 2;\n}\n");
    s += "commit g_inducer\nmessage g: drop check\n";
    s += &file("g.c", "void init(void)\n{\n\tsetup();\n\tstart();\n}\n");
    s += "commit t_fix\n";
    s += &msg("t_fix", "t: read fix");
    s += &file("t.c", &c_file("ret = do_read(a, b, 1);"));
    s += "commit x_fix\n";
    s += &msg("x_fix", "a: cope with zero");
    s += &file("a.c", "int f(void)\n{\n\treturn g() + 1;\n}\n");
    s += "commit s_fix\n";
    s += &msg("s_fix", "s: add one again");
    s += &file("s.c", "int s(int v)\n{\n\treturn v + 1;\n}\n");
    s += "commit g_fix\n";
    s += &msg("g_fix", "g: check again");
    s += &file("g.c", "void init(void)\n{\n\tsetup();\n\tcheck();\n\tstart();\n}\n");
    s
}

fn build(script_text: &str, dir: &Path, name: &str) -> BTreeMap<String, String> {
    let path = dir.join(format!("{name}.fixture"));
    fs::write(&path, script_text).unwrap();
    let repo = dir.join(name);
    let out = ok(&["fixture", "build", path.to_str().unwrap(), "--out", repo.to_str().unwrap()]);
    out.lines()
        .map(|l| {
            let (a, b) = l.split_once(' ').unwrap();
            (a.to_string(), b.to_string())
        })
        .collect()
}

struct Fixture {
    _dir: tempfile::TempDir,
    repo: PathBuf,
    ids: BTreeMap<String, String>,
}

impl Fixture {
    fn out(&self, name: &str) -> PathBuf {
        self._dir.path().join(name)
    }
}

/// Builds the history twice: once to learn the inducer ids, once with the
/// trailers in place. Fix messages come after every inducer, so those ids
/// do not move.
fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let first = build(&script(&BTreeMap::new()), dir.path(), "draft");
    let subjects = [("t_inducer", "t: pass b"), ("x_inducer", "b: return zero"), ("s_inducer", "s: add two"), ("g_inducer", "g: drop check")];
    let mut trailers = BTreeMap::new();
    for (fix, (ind, subject)) in ["t_fix", "x_fix", "s_fix", "g_fix"].into_iter().zip(subjects) {
        trailers.insert(fix, format!("Fixes: {} (\"{subject}\")", &first[ind][..12]));
    }
    let ids = build(&script(&trailers), dir.path(), "repo");
    for ind in ["t_inducer", "x_inducer", "s_inducer", "g_inducer"] {
        assert_eq!(ids[ind], first[ind]);
    }
    Fixture {
        repo: dir.path().join("repo"),
        _dir: dir,
        ids,
    }
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn end_to_end() {
    let f = fixture();
    let out = f.out("out");
    let base = ["--repo", f.repo.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let with = |cmd: &str, extra: &[&str]| {
        let mut v = vec![cmd];
        v.extend(base);
        v.extend(extra);
        v.into_iter().map(str::to_string).collect::<Vec<_>>()
    };
    let run = |cmd: &str, extra: &[&str]| {
        let args = with(cmd, extra);
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>())
    };

    let mined = run("mine", &[]);
    assert!(mined.starts_with("mine: 4 fixes from 4 annotated commits; abnormal 0"), "{mined}");

    let summary = run("run", &["--workers", "3", "--attribution"]);
    assert!(summary.contains("4 fixes"), "{summary}");
    for a in ["B", "AG", "L", "R", "MA", "PYD", "TC"] {
        assert!(out.join("predictions").join(format!("{a}.csv")).is_file(), "{a}");
    }
    assert!(out.join("predictions/TC.chains.json").is_file());
    let b_csv = fs::read(out.join("predictions/B.csv")).unwrap();

    // same inputs: skipped, same summary, same bytes
    assert_eq!(run("run", &["--workers", "3", "--attribution"]), summary);
    assert_eq!(fs::read(out.join("predictions/B.csv")).unwrap(), b_csv);

    // a different worker count produces identical files
    let out1 = f.out("out1");
    let args1 = ["--repo", f.repo.to_str().unwrap(), "--out", out1.to_str().unwrap()];
    ok(&[&["mine"][..], &args1].concat());
    ok(&[&["run", "--workers", "1", "--attribution"][..], &args1].concat());
    for a in ["B", "AG", "L", "R", "MA", "PYD", "TC"] {
        let name = format!("predictions/{a}.csv");
        assert_eq!(fs::read(out.join(&name)).unwrap(), fs::read(out1.join(&name)).unwrap(), "{a}");
    }
    assert_eq!(fs::read(out.join("predictions/TC.chains.json")).unwrap(), fs::read(out1.join("predictions/TC.chains.json")).unwrap());

    let classified = run("classify", &["--emit-prompts"]);
    assert!(classified.contains("Success 1") && classified.contains("RemoveMG 1") && classified.contains("FailureWithoutMG 2"), "{classified}");
    let rows = csv_rows(&out.join("classification.csv"));
    let b_rows: BTreeMap<String, (String, String)> = rows
        .iter()
        .filter(|r| r[1] == "B")
        .map(|r| (r[0].clone(), (r[2].clone(), r[3].clone())))
        .collect();
    let expect = [
        ("t_fix", "FailureWithoutMG", "LineChange"),
        ("x_fix", "FailureWithoutMG", "CrossFile"),
        ("s_fix", "Success", ""),
        ("g_fix", "RemoveMG", ""),
    ];
    for (fix, cat, mode) in expect {
        assert_eq!(b_rows[&f.ids[fix]], (cat.to_string(), mode.to_string()), "{fix}");
    }
    let prompts: Vec<String> = fs::read_dir(out.join("prompts"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(prompts, vec![format!("{}.CrossFile.prompt.txt", f.ids["x_fix"])]);
    let prompt = fs::read_to_string(out.join("prompts").join(&prompts[0])).unwrap();
    assert!(prompt.starts_with("a: cope with zero\n"), "{prompt}");
    assert!(prompt.trim_end().ends_with("which file in the Linux kernel could be causing this bug-fixing commit?"));
    assert!(!prompt.contains(&f.ids["x_inducer"][..12]));

    let reported = run("report", &[]);
    assert!(reported.starts_with("report: 4 fixes, 7 algorithms"), "{reported}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let b = report["algorithms"].as_array().unwrap().iter().find(|r| r["algorithm"] == "B").unwrap();
    // hits: s only; B predicts for t, x and s
    assert!((b["recall"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!((b["precision"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!((b["f1"].as_f64().unwrap() - 2.0 / 7.0).abs() < 1e-12);
    assert_eq!(report["failure_modes"]["LineChange"], 1);
    assert_eq!(report["failure_modes"]["CrossFile"], 1);
    assert_eq!(report["categories"]["B"]["RemoveMG"], 1);
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    assert!(table.starts_with("Algorithm,Precision,Recall,F1\nB-SZZ,0.3333,0.2500,0.2857\n"), "{table}");
    for key in ["overlap", "unique", "ghosts", "stats"] {
        assert!(!report[key].is_null(), "{key}");
    }
}

#[test]
fn all_correct_toy_reports_ones() {
    let dir = tempfile::tempdir().unwrap();
    let body = |v: &str| format!("int s(int v)\n{{\n\treturn v {v};\n}}\n");
    let make = |trailer: &str| {
        format!(
            "commit base\nmessage base\nwrite s.c <<EOF\n{}EOF\ncommit bad\nmessage s: minus\nwrite s.c <<EOF\n{}EOF\ncommit fix\nmessage <<M\ns: plus\n\n{trailer}\nM\nwrite s.c <<EOF\n{}EOF\n",
            body("+ 0"),
            body("- 1"),
            body("+ 1")
        )
    };
    let first = build(&make(""), dir.path(), "draft");
    build(&make(&format!("Fixes: {}", &first["bad"][..12])), dir.path(), "repo");
    let repo = dir.path().join("repo");
    let out = dir.path().join("out");
    let args = ["--repo", repo.to_str().unwrap(), "--out", out.to_str().unwrap(), "--algos", "B,AG,L,R,MA,PYD"];
    for cmd in ["mine", "run", "classify", "report"] {
        ok(&[&[cmd][..], &args].concat());
    }
    let rows = csv_rows(&out.join("table.csv"));
    assert_eq!(rows.len(), 6);
    for r in rows {
        assert_eq!(&r[1..], ["1.0000", "1.0000", "1.0000"], "{r:?}");
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let f = fixture();
    let cfg = f.out("szz.conf");
    let out = f.out("from-config");
    fs::write(&cfg, format!("repo = {}\nout = {}\nalgos = B,AG\n", f.repo.display(), out.display())).unwrap();
    ok(&["mine", "--config", cfg.to_str().unwrap()]);
    ok(&["run", "--config", cfg.to_str().unwrap(), "--algos", "R"]);
    let written: Vec<String> = fs::read_dir(out.join("predictions"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(written, ["R.csv"]);
    ok(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(out.join("predictions/AG.csv").is_file());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();

    assert_eq!(code(&szz(&["mine", "--repo", &p("nowhere"), "--out", &p("o")])), 2);
    fs::create_dir(p("empty")).unwrap();
    assert!(Command::new("git").args(["init", "-q", &p("empty")]).status().unwrap().success());
    assert_eq!(code(&szz(&["mine", "--repo", &p("empty"), "--out", &p("o")])), 2);

    assert_eq!(code(&szz(&["mine"])), 64);
    assert_eq!(code(&szz(&["mine", "--repo", "x", "--similarity-threshold", "1.5"])), 64);
    assert_eq!(code(&szz(&["run", "--repo", "x", "--algos", "B,Q"])), 64);
    assert_eq!(code(&szz(&["frobnicate"])), 64);
    assert_eq!(code(&szz(&["mine", "--config", &p("missing.conf")])), 64);
    assert_eq!(code(&szz(&["--help"])), 0);

    let f = fixture();
    let repo = f.repo.to_str().unwrap();
    let out = f.out("o");
    let out = out.to_str().unwrap();
    assert_eq!(code(&szz(&["run", "--repo", repo, "--out", out])), 4);
    assert_eq!(code(&szz(&["classify", "--repo", repo, "--out", out])), 4);
    ok(&["mine", "--repo", repo, "--out", out]);
    assert_eq!(code(&szz(&["classify", "--repo", repo, "--out", out])), 5);
    ok(&["run", "--repo", repo, "--out", out, "--algos", "B", "--blame-count", "-1"]);
    assert_eq!(code(&szz(&["report", "--repo", repo, "--out", out, "--algos", "B"])), 6);
    ok(&["classify", "--repo", repo, "--out", out, "--algos", "B"]);
    assert_eq!(code(&szz(&["report", "--repo", repo, "--out", out, "--algos", "B,AG"])), 6);
    ok(&["report", "--repo", repo, "--out", out, "--algos", "B"]);

    // an output path under a regular file cannot be created
    let blocked = f.out("file");
    fs::write(&blocked, "x").unwrap();
    let nested = blocked.join("out");
    assert_eq!(code(&szz(&["mine", "--repo", repo, "--out", nested.to_str().unwrap()])), 3);
}
