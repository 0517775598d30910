use anyhow::Context;
use quark_service::{app, load_kb_dir, AppState, Config};
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into())).init();

    let file = match std::env::args().nth(1) {
        Some(path) => Some(std::fs::read_to_string(&path).with_context(|| format!("reading {path}"))?),
        None => None,
    };
    let config = Config::resolve(file.as_deref(), |k| std::env::var(k).ok())?;
    let kbs = load_kb_dir(&config.kb_dir).map_err(anyhow::Error::msg)?;
    tracing::info!("loaded {} knowledge base(s) from {}", kbs.len(), config.kb_dir.display());
    let state = AppState::new(kbs, config.data_dir.clone()).map_err(anyhow::Error::msg)?;

    let listener = tokio::net::TcpListener::bind(config.addr).await.with_context(|| format!("binding {}", config.addr))?;
    tracing::info!("listening on {}", config.addr);
    axum::serve(listener, app(state, &config.cors_origins))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
