use fifdim_bench::builtin;

#[test]
fn bench_models_load() {
    for name in ["example61", "weierstrass", "affine"] {
        let m = builtin(name);
        assert!(m.n() >= 2, "{name}");
    }
}
