use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").unwrap());
    let header = crate_dir.join("include").join("forumguard.h");
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let config = cbindgen::Config::from_file(crate_dir.join("cbindgen.toml")).expect("cbindgen.toml");
    let bindings = cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("generate C header");
    let mut out = Vec::new();
    bindings.write(&mut out);
    // Rewriting an unchanged header would dirty the tree and retrigger builds.
    if std::fs::read(&header).ok().as_deref() != Some(out.as_slice()) {
        std::fs::write(&header, out).expect("write header");
    }
}
