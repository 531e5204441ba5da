use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR"));
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let config = cbindgen::Config::from_file(crate_dir.join("cbindgen.toml")).expect("cbindgen.toml");
    let bindings = cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("unable to generate C bindings");

    // Rewrite only on change so the header's mtime is stable between builds.
    let out = crate_dir.join("include").join("station.h");
    let mut rendered = Vec::new();
    bindings.write(&mut rendered);
    if std::fs::read(&out).ok().as_deref() != Some(rendered.as_slice()) {
        std::fs::create_dir_all(out.parent().unwrap()).expect("include dir");
        std::fs::write(&out, rendered).expect("write station.h");
    }
}
