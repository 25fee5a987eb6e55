//! Synthetic C sources for the benchmarks.

/// A file of `n` small functions with comments, strings and nested blocks.
pub fn synthetic_source(n: usize) -> String {
    let mut s = String::from("#include <linux/kernel.h>\n\n/* driver state */\nstatic int table[] = { 1, 2, 3 };\n\n");
    for i in 0..n {
        s.push_str(&format!(
            "/**\n * fn_{i} - step {i}\n */\nstatic int fn_{i}(struct dev *d, int v)\n{{\n\tint rc = 0; // local\n\n\tif (v > {i}) {{\n\t\tpr_info(\"{{%d}}\\n\", v);\n\t\trc = helper(d, v - {i});\n\t}}\n\treturn rc;\n}}\n\n"
        ));
    }
    s
}

/// Pairs of similar source lines, as a fix and its predecessor would have.
pub fn line_pairs(n: usize) -> Vec<(String, String)> {
    (0..n)
        .map(|i| {
            (
                format!("\trc = helper_{i}(d->count, flags | FLAG_{i});"),
                format!("\trc = helper_{i}(d->count + 1, flags);"),
            )
        })
        .collect()
}
