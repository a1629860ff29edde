use zonebench_core::data::*;
use zonebench_core::pcnn::*;
fn main() {
    let records = generate_synthetic(60, 0).unwrap();
    let trajs = extract_trajectories(&records, ExtractParams::default());
    let split = split_dataset(trajs, 0.2);
    println!("train {} val {}", split.train.len(), split.validation.len());
    let cfg = PcnnTrainConfig { epochs: 15, ..Default::default() };
    let t0 = std::time::Instant::now();
    let out = pcnn_train(&split, &cfg, 0).unwrap();
    println!("trained in {:.1}s", t0.elapsed().as_secs_f64());
    for h in out.history.iter() {
        println!("epoch {:2} train {:.4} val {:.4} (C^2, {}-step)", h.epoch, h.train_mse_c2, h.val_mse_c2, cfg.horizon);
    }
    let m = &out.model;
    println!("phys: a {:.5} b {:.5} c {:.5} d {:.5} (norm units)", m.phys.a(), m.phys.b(), m.phys.c(), m.phys.d());
    println!("temp scale {:.2} C/unit -> a {:.4} C/kWstep, truth 0.09", m.temp_scale(), m.phys.a()*m.temp_scale());
    let one = pcnn_multistep_mse(m, &split.validation, 1).unwrap();
    println!("1-step val MSE {:.5} C^2 (10x noise var = 0.1)", one);
}
