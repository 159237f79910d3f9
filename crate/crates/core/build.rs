fn main() {
    // lapack-sys only declares the symbols; the system LAPACK provides them.
    println!("cargo:rustc-link-lib=lapack");
}
