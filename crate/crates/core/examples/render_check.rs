fn main() {
    let recs = fevgan_core::data::make_synthetic_dataset(2, 7);
    std::fs::create_dir_all("/tmp/synth_check").unwrap();
    fevgan_core::data::save_dataset(&recs, std::path::Path::new("/tmp/synth_check")).unwrap();
    println!("saved {} records", recs.len());
}
