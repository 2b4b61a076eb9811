use std::fs;
use std::path::Path;

type Target = (&'static str, fn(&[u8]));

#[test]
fn corpus_seeds_pass_the_checks() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus");
    let targets: [Target; 5] = [
        ("parse_expr", kamnd_fuzz::check_parse_expr),
        ("model_json", kamnd_fuzz::check_model_json),
        ("region_arg", kamnd_fuzz::check_region_arg),
        ("config_toml", kamnd_fuzz::check_config_toml),
        ("eval_jet", kamnd_fuzz::check_eval_jet),
    ];
    for (name, check) in targets {
        let mut n = 0;
        for entry in fs::read_dir(root.join(name)).unwrap() {
            check(&fs::read(entry.unwrap().path()).unwrap());
            n += 1;
        }
        assert!(n > 0, "no seeds for {name}");
    }
}
