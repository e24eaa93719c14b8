use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use drivesim_core::procgen::{generate_maps, PGConfig};
use drivesim_core::scenario_io::{export_scenario, map_hash, Metadata};

pub const MANIFEST: &str = "digests.txt";

#[derive(Clone, Debug)]
pub struct GenerateSummary {
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// Generate `count` maps of `blocks` blocks and write one scenario
/// document per map plus a `hash  file` manifest.
pub fn generate(blocks: usize, tries: usize, count: usize, seed: u64, out: &Path) -> anyhow::Result<GenerateSummary> {
    let cfg = PGConfig {
        max_tries: tries,
        ..PGConfig::block_num(blocks, count, seed)
    };
    cfg.validate()?;
    let maps = generate_maps(&cfg)?;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut files = Vec::with_capacity(maps.len());
    let mut manifest = String::new();
    for (i, net) in maps.iter().enumerate() {
        let name = format!("pg_{:06}.json", seed + i as u64);
        let doc = export_scenario(
            net,
            None,
            Metadata {
                source: "procedural".into(),
                case_id: format!("seed{seed}-n{blocks}-{i}"),
                discretized: false,
            },
        );
        let path = out.join(&name);
        doc.save(&path).with_context(|| format!("cannot write {}", path.display()))?;
        manifest.push_str(&format!("{}  {}\n", map_hash(net), name));
        files.push(path);
    }
    let mpath = out.join(MANIFEST);
    std::fs::File::create(&mpath)
        .and_then(|mut f| f.write_all(manifest.as_bytes()))
        .with_context(|| format!("cannot write {}", mpath.display()))?;
    Ok(GenerateSummary { files, manifest: mpath })
}
