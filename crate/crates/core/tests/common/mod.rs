#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use szz_core::fixture::{build_fixture, FixtureMap, FixtureScript};
use szz_core::{BugFixLink, CommitId};

pub fn tempdir() -> tempfile::TempDir {
    tempfile::tempdir().expect("temp dir")
}

pub fn build(script: &FixtureScript, dir: &Path) -> FixtureMap {
    build_fixture(script, dir.join("repo")).expect("fixture builds")
}

pub fn link(map: &FixtureMap, fix: &str, inducers: &[&str]) -> BugFixLink {
    let mut inducing: Vec<_> = inducers.iter().map(|l| map.get(l).clone()).collect();
    inducing.sort_by(|a, b| a.id.cmp(&b.id));
    BugFixLink {
        fixing_commit: map.get(fix).clone(),
        inducing_commits: inducing,
        raw_refs: Vec::new(),
    }
}

pub fn ids(map: &FixtureMap, labels: &[&str]) -> BTreeSet<CommitId> {
    labels.iter().map(|l| map.id(l).clone()).collect()
}

fn subject_of(script: &FixtureScript, label: &str) -> String {
    let m = &script.step(label).expect("label").message;
    m.lines().next().unwrap_or("").to_string()
}

/// Builds `script` after appending a kernel-style `Fixes:` trailer to every
/// fix in `links` (fix label, inducer labels). Ids of earlier commits do
/// not depend on later messages, so a few rebuilds settle every reference.
pub fn build_with_trailers(script: &FixtureScript, links: &[(&str, &[&str])], dir: &Path) -> FixtureMap {
    let base: BTreeMap<String, String> = links
        .iter()
        .map(|(f, _)| (f.to_string(), script.step(f).expect("fix label").message.clone()))
        .collect();
    let mut current = script.clone();
    for round in 0..8 {
        let scratch = dir.join(format!("scratch{round}"));
        let map = build_fixture(&current, &scratch).expect("fixture builds");
        let mut next = current.clone();
        for (fix, inducers) in links {
            let mut msg = base[*fix].trim_end().to_string();
            msg.push_str("\n\n");
            for ind in *inducers {
                msg.push_str(&format!(
                    "Fixes: {} (\"{}\")\n",
                    &map.id(ind).as_str()[..12],
                    subject_of(&current, ind)
                ));
            }
            let step = next.steps.iter_mut().find(|s| s.label == *fix).expect("fix label");
            step.message = msg;
        }
        if next == current {
            std::fs::remove_dir_all(&scratch).ok();
            return build(&current, dir);
        }
        std::fs::remove_dir_all(&scratch).ok();
        current = next;
    }
    panic!("trailer references did not settle");
}

/// A five-commit line lineage: the tracked call is
/// edited by four commits after the one that introduced it, the second
/// of them being the real culprit.
pub fn lineage_script() -> FixtureScript {
    let header = [
        "#include \"io.h\"",
        "",
        "int read_block(struct dev *dev, char *buf, size_t len)",
        "{",
        "\tint ret;",
        "",
    ];
    let footer = ["\tif (ret < 0)", "\t\treturn ret;", "\treturn 0;", "}"];
    let body = |call: &str, extra: &str| -> Vec<String> {
        let mut v: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        v.push(extra.to_string());
        v.push(call.to_string());
        v.extend(footer.iter().map(|s| s.to_string()));
        v
    };
    let mut s = FixtureScript::new();
    s.commit("initial")
        .message("io: add block reader")
        .write_lines("io.c", &body("\tret = do_read(dev, buf, len);", "\tdev->reads++;"));
    s.commit("descendant_a")
        .message("io: count in units")
        .write_lines("io.c", &body("\tret = do_read(dev, buf, len / unit);", "\tdev->stats.reads++;"));
    s.commit("inducer")
        .message("io: skip the trailing marker")
        .write_lines("io.c", &body("\tret = do_read(dev, buf, len / unit - 1);", "\tatomic_inc(&dev->stats.reads);"));
    s.commit("descendant_b")
        .message("io: rename buffer argument")
        .write_lines("io.c", &body("\tret = do_read(dev, buffer, len / unit - 1);", "\tatomic_inc(&dev->stats.nr_reads);"));
    s.commit("previous")
        .message("io: use unsigned arithmetic")
        .write_lines("io.c", &body("\tret = do_read(dev, buffer, len / unit - 1U);", "\tatomic64_inc(&dev->stats.nr_reads);"));
    s.commit("fix")
        .message("io: read the whole block")
        .write_lines("io.c", &body("\tret = do_read(dev, buffer, len / unit);", "\tatomic64_inc(&dev->stats.nr_reads);"));
    s
}

pub const LINEAGE_CHAIN: [&str; 5] = ["previous", "descendant_b", "inducer", "descendant_a", "initial"];

/// Base driver source used by the ladder fixtures. `call` is the line the
/// fixes modify; `setup_extra` lines go before `d->ready = 1;`.
pub fn driver_source(call: &str, setup_extra: &[&str], teardown_value: &str) -> String {
    let mut lines = vec![
        "#include \"drv.h\"".to_string(),
        String::new(),
        "static int helper(int v)".into(),
        "{".into(),
        "\treturn v * 2;".into(),
        "}".into(),
        String::new(),
        "int setup(struct dev *d)".into(),
        "{".into(),
        "\tint rc;".into(),
        String::new(),
        call.to_string(),
        "\tif (rc < 0)".into(),
        "\t\treturn rc;".into(),
    ];
    lines.extend(setup_extra.iter().map(|s| s.to_string()));
    lines.extend([
        "\td->ready = 1;".to_string(),
        "\treturn 0;".into(),
        "}".into(),
        String::new(),
        "void teardown(struct dev *d)".into(),
        "{".into(),
        format!("\td->ready = {teardown_value};"),
        "}".into(),
    ]);
    let mut s = lines.join("\n");
    s.push('\n');
    s
}

pub const CALL: &str = "\trc = helper(d->count);";
pub const FIXED_CALL: &str = "\trc = helper(d->count + 1);";
pub const HEADER: &str = "struct dev {\n\tint count;\n\tint ready;\n};\n";

/// One scripted failure per ladder rung. The fix always edits the `helper`
/// call of `setup`; the culprit is labelled `inducer`.
pub fn ladder_script(mode: szz_core::classify::FailureMode) -> FixtureScript {
    use szz_core::classify::FailureMode::*;
    let mut s = FixtureScript::new();
    s.commit("base")
        .message("drv: initial driver")
        .write("drv.c", &driver_source(CALL, &[], "0"))
        .write("drv.h", HEADER);
    let fix_from;
    match mode {
        LineChange => {
            let bug = "\trc = helper(d->count - 1);";
            let later = "\trc = helper(d->count - 1U);";
            s.commit("inducer")
                .message("drv: skip the sentinel")
                .write("drv.c", &driver_source(bug, &[], "0"));
            s.commit("later")
                .message("drv: unsigned sentinel")
                .write("drv.c", &driver_source(later, &[], "0"));
            fix_from = (vec![], "0");
        }
        FunctionBlame => {
            s.commit("inducer")
                .message("drv: clear flags on setup")
                .write("drv.c", &driver_source(CALL, &["\td->flags = 0;"], "0"));
            fix_from = (vec!["\td->flags = 0;"], "0");
        }
        FunctionLog => {
            s.commit("inducer")
                .message("drv: clear flags on setup")
                .write("drv.c", &driver_source(CALL, &["\td->flags = 0;"], "0"));
            s.commit("later")
                .message("drv: idle mode instead of flags")
                .write("drv.c", &driver_source(CALL, &["\td->mode = MODE_IDLE;"], "0"));
            fix_from = (vec!["\td->mode = MODE_IDLE;"], "0");
        }
        WithinFile => {
            s.commit("inducer")
                .message("drv: poison ready on teardown")
                .write("drv.c", &driver_source(CALL, &[], "-1"));
            fix_from = (vec![], "-1");
        }
        CrossFile => {
            s.commit("inducer")
                .message("drv: add flags field")
                .write("drv.h", "struct dev {\n\tint count;\n\tint ready;\n\tint flags;\n};\n");
            fix_from = (vec![], "0");
        }
    }
    s.commit("unrelated")
        .message("docs: add readme")
        .write("README", "driver notes\n");
    let (extra, teardown) = fix_from;
    s.commit("fix")
        .message("drv: pass the full count")
        .write("drv.c", &driver_source(FIXED_CALL, &extra, teardown));
    s
}

/// A fix that only adds lines, and a culprit that only removed lines.
pub fn ghost_script() -> FixtureScript {
    let mut s = FixtureScript::new();
    s.commit("base")
        .message("lib: first version")
        .write_lines("lib.c", &["int a(void)", "{", "\tcheck();", "\treturn 1;", "}"]);
    s.commit("amg_inducer")
        .message("lib: drop the check")
        .write_lines("lib.c", &["int a(void)", "{", "\treturn 1;", "}"]);
    s.commit("rmg_fix")
        .message("lib: restore the check")
        .write_lines("lib.c", &["int a(void)", "{", "\tcheck();", "\treturn 1;", "}"]);
    s.commit("edit")
        .message("lib: return two")
        .write_lines("lib.c", &["int a(void)", "{", "\tcheck();", "\treturn 2;", "}"]);
    s.commit("edit_fix")
        .message("lib: return three")
        .write_lines("lib.c", &["int a(void)", "{", "\tcheck();", "\treturn 3;", "}"]);
    s
}

/// Random fixture: unique `token = version;` lines edited by modifies,
/// deletes and inserts at least two lines apart, optionally with a side
/// branch over its own files merged back verbatim.
pub fn random_script(seed: u64) -> FixtureScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_commits: usize = rng.gen_range(4..=25);
    let n_files: usize = rng.gen_range(1..=6);
    let mut g = Gen {
        rng,
        files: BTreeMap::new(),
        script: FixtureScript::new(),
    };

    let first_files = g.rng.gen_range(1..=n_files);
    let mut root_edits = Vec::new();
    for i in 0..first_files {
        let n = g.rng.gen_range(3..=12);
        let lines: Vec<(String, u32)> = (0..n).map(|_| (g.token(), 0)).collect();
        root_edits.push(format!("f{i}.c"));
        g.files.insert(format!("f{i}.c"), lines);
    }
    g.emit("c0", &[], &root_edits);
    let mut main_tip = "c0".to_string();
    let mut next = 1;

    let branch_at = (n_files >= 2 && n_commits >= 8 && g.rng.gen_bool(0.5)).then(|| g.rng.gen_range(1..n_commits - 5));
    while next < n_commits {
        if branch_at == Some(next) && g.files.len() >= 2 {
            let names: Vec<String> = g.files.keys().cloned().collect();
            let k = g.rng.gen_range(1..names.len());
            let side: Vec<String> = names.choose_multiple(&mut g.rng, k).cloned().collect();
            let main: Vec<String> = names.iter().filter(|n| !side.contains(n)).cloned().collect();
            let mut side_tip = main_tip.clone();
            let side_len = g.rng.gen_range(1..=2);
            for _ in 0..side_len {
                let label = format!("c{next}");
                let touched = g.edit_some(&side);
                g.emit(&label, &[side_tip.as_str()], &touched);
                side_tip = label;
                next += 1;
            }
            let side_state: BTreeMap<String, Vec<(String, u32)>> =
                side.iter().map(|n| (n.clone(), g.files[n].clone())).collect();
            let main_len = g.rng.gen_range(1..=2);
            for _ in 0..main_len {
                let label = format!("c{next}");
                let touched = g.edit_some(&main);
                g.emit(&label, &[main_tip.as_str()], &touched);
                main_tip = label;
                next += 1;
            }
            // the merge result keeps every side file as the side left it
            for (n, lines) in side_state {
                g.files.insert(n, lines);
            }
            let label = format!("c{next}");
            g.emit(&label, &[main_tip.as_str(), side_tip.as_str()], &side);
            main_tip = label;
            next += 1;
            continue;
        }
        let label = format!("c{next}");
        let mut touched = Vec::new();
        if g.files.len() < n_files && g.rng.gen_bool(0.25) {
            let name = format!("f{}.c", g.files.len());
            let n = g.rng.gen_range(3..=12);
            let lines = (0..n).map(|_| (g.token(), 0)).collect();
            g.files.insert(name.clone(), lines);
            touched.push(name);
        } else {
            let names: Vec<String> = g.files.keys().cloned().collect();
            touched = g.edit_some(&names);
        }
        g.emit(&label, &[main_tip.as_str()], &touched);
        main_tip = label;
        next += 1;
    }
    g.script
}

struct Gen {
    rng: ChaCha8Rng,
    files: BTreeMap<String, Vec<(String, u32)>>,
    script: FixtureScript,
}

impl Gen {
    fn token(&mut self) -> String {
        (0..10).map(|_| self.rng.gen_range(b'a'..=b'z') as char).collect()
    }

    fn render(lines: &[(String, u32)]) -> Vec<String> {
        lines.iter().map(|(t, v)| format!("{t} = {v};")).collect()
    }

    fn emit(&mut self, label: &str, parents: &[&str], touched: &[String]) {
        let contents: Vec<(String, Vec<String>)> = touched
            .iter()
            .map(|n| (n.clone(), Self::render(&self.files[n])))
            .collect();
        let step = self.script.commit(label);
        step.parents(parents);
        for (n, lines) in contents {
            step.write_lines(&n, &lines);
        }
    }

    /// Edits one or two of `names`, returning the files touched.
    fn edit_some(&mut self, names: &[String]) -> Vec<String> {
        let k = self.rng.gen_range(1..=names.len().min(2));
        let mut chosen: Vec<String> = names.choose_multiple(&mut self.rng, k).cloned().collect();
        chosen.sort();
        for n in &chosen {
            self.edit_file(n);
        }
        chosen
    }

    fn edit_file(&mut self, name: &str) {
        let len = self.files[name].len();
        let want = self.rng.gen_range(1..=3);
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut self.rng);
        let mut picked: Vec<usize> = Vec::new();
        for i in order {
            if picked.len() == want {
                break;
            }
            if picked.iter().all(|&j| i.abs_diff(j) >= 2) {
                picked.push(i);
            }
        }
        picked.sort_unstable_by(|a, b| b.cmp(a));
        for i in picked {
            let op = self.rng.gen_range(0..3);
            let fresh = self.token();
            let lines = self.files.get_mut(name).expect("file");
            match op {
                1 if lines.len() > 2 => {
                    lines.remove(i);
                }
                2 => lines.insert(i + 1, (fresh, 0)),
                _ => lines[i].1 += 1,
            }
        }
    }
}

/// `origin` writes a line, `reindent` and `comment` only touch its layout,
/// `fix` changes it.
pub fn cosmetic_script() -> FixtureScript {
    let mut s = FixtureScript::new();
    s.commit("origin")
        .message("math: add inc")
        .write("m.c", "int inc(int x)\n{\n\treturn x + 1;\n}\n");
    s.commit("reindent")
        .message("math: spaces")
        .write("m.c", "int inc(int x)\n{\n        return x + 1;\n}\n");
    s.commit("comment")
        .message("math: note")
        .write("m.c", "int inc(int x)\n{\n        return x + 1; /* bump */\n}\n");
    s.commit("fix")
        .message("math: inc by two")
        .write("m.c", "int inc(int x)\n{\n        return x + 2; /* bump */\n}\n");
    s
}

/// A conflicting merge whose resolution rewrites the line later fixed.
pub fn merge_script() -> FixtureScript {
    let file = |v: &str| format!("int limit(void)\n{{\n\treturn {v};\n}}\n\nint other(void)\n{{\n\treturn 0;\n}}\n");
    let mut s = FixtureScript::new();
    s.commit("base").message("limits").write("l.c", &file("10"));
    s.commit("side").message("side limit").write("l.c", &file("20"));
    s.commit("main").parents(&["base"]).message("main limit").write("l.c", &file("30"));
    s.commit("merge")
        .parents(&["main", "side"])
        .message("Merge branch side")
        .write("l.c", &file("40"));
    s.commit("fix").message("limit fix").write("l.c", &file("50"));
    s
}

/// The fix edits one code line and drops one comment line from different
/// origins.
pub fn comment_script() -> FixtureScript {
    let mut s = FixtureScript::new();
    s.commit("code")
        .message("add f")
        .write_lines("c.c", &["int f(void)", "{", "\treturn 1;", "}"]);
    s.commit("doc")
        .message("document f")
        .write_lines("c.c", &["/* returns one */", "int f(void)", "{", "\treturn 1;", "}"]);
    s.commit("blank")
        .message("space out")
        .write_lines("c.c", &["/* returns one */", "", "int f(void)", "{", "\treturn 1;", "}"]);
    s.commit("fix")
        .message("return two")
        .write_lines("c.c", &["int f(void)", "{", "\treturn 2;", "}"]);
    s
}

/// Two candidates feeding one fix with equal diff sizes and timestamps, so
/// L and R fall back to the smaller id.
pub fn tie_script() -> FixtureScript {
    let mut s = FixtureScript::new();
    s.commit("base").message("base").write_lines("t.c", &["a = 0;", "keep;", "b = 0;"]).time(1_600_000_000);
    s.commit("one").message("one").write_lines("t.c", &["a = 1;", "keep;", "b = 0;"]).time(1_600_000_100);
    s.commit("two").message("two").write_lines("t.c", &["a = 1;", "keep;", "b = 1;"]).time(1_600_000_100);
    s.commit("fix").message("fix").write_lines("t.c", &["a = 2;", "keep;", "b = 2;"]).time(1_600_000_200);
    s
}

/// Ids and labels of the miner robustness fixture.
pub struct MinerFixture {
    pub map: FixtureMap,
    /// 7-hex window shared by `twin_a` and `twin_b`.
    pub window: String,
    pub missing: String,
}

/// Five fixes: a clean trailer, a link, a short id that matches nothing,
/// an id with its first digit dropped, and a window two commits share.
pub fn miner_fixture(dir: &Path) -> MinerFixture {
    use szz_core::fixture::{grind_message, shared_window};

    let mut s = FixtureScript::new();
    s.commit("clean_target").message("net: add queue").write("a.c", "int q;\n");
    s.commit("url_target").message("net: add pool").write("a.c", "int q;\nint p;\n");
    s.commit("typo_target").message("net: add ring").write("a.c", "int q;\nint p;\nint r;\n");
    s.commit("twin_a").message("net: add map").write("b.c", "int m;\n");
    s.commit("twin_b").message("net: add set").write("b.c", "int m;\nint s;\n");

    let scratch = dir.join("scratch");
    let pre = build_fixture(&s, &scratch).expect("prefix builds");
    let tree = pre.tree_of("twin_b").expect("tree");
    let a = pre.id("twin_a").clone();
    let (msg, b) = grind_message(&tree, &[&a], s.time_of(4), "net: add set", "", 20_000_000, |id| {
        shared_window(&a, id).is_some()
    })
    .expect("a shared window within the search budget");
    s.steps[4].message = msg;
    let window = shared_window(&a, &b).expect("window");
    std::fs::remove_dir_all(&scratch).ok();

    let clean = pre.id("clean_target").as_str()[..12].to_string();
    let url = pre.id("url_target").to_string();
    let typo = pre.id("typo_target").as_str()[1..13].to_string();
    let mut missing = String::new();
    for k in 0u32.. {
        missing = format!("{:07x}", 0x0abcdef + k);
        let all = [&pre.commits["clean_target"], &pre.commits["url_target"], &pre.commits["typo_target"]];
        if all.iter().all(|c| !c.id.as_str().contains(&missing)) && !a.as_str().contains(&missing) && !b.as_str().contains(&missing) {
            break;
        }
    }

    s.commit("fix_clean")
        .message(&format!("net: fix queue\n\nFixes: {clean} (\"net: add queue\")\n"))
        .write("a.c", "int q = 0;\nint p;\nint r;\n");
    s.commit("fix_url")
        .message(&format!("net: fix pool\n\nFixes: https://git.kernel.org/torvalds/c/{url}\n"))
        .write("a.c", "int q = 0;\nint p = 0;\nint r;\n");
    s.commit("fix_short")
        .message(&format!("net: fix thing\n\nFixes: {missing} (\"net: gone\")\n"))
        .write("a.c", "int q = 0;\nint p = 0;\nint r = 0;\n");
    s.commit("fix_typo")
        .message(&format!("net: fix ring\n\nFixes: {typo} (\"net: add ring\")\n"))
        .write("a.c", "int q = 1;\nint p = 0;\nint r = 0;\n");
    s.commit("fix_ambiguous")
        .message(&format!("net: fix map\n\nFixes: {window}\n"))
        .write("b.c", "int m = 0;\nint s;\n");
    let map = build(&s, dir);
    assert_eq!(map.id("twin_b"), &b);
    MinerFixture { map, window, missing }
}
