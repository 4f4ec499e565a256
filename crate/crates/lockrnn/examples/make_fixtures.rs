//! Writes the shipped fixture files into `crates/lockrnn/fixtures/`.

use lockrnn::{fixtures, io};

fn main() -> Result<(), lockrnn::CliError> {
    let dir = fixtures::dir();
    std::fs::create_dir_all(&dir).map_err(|e| lockrnn::CliError::io(dir.clone(), e))?;
    for (name, body) in fixtures::all_files() {
        let path = dir.join(&name);
        io::write_atomic(&path, body.as_bytes())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
