//! The long-running process: four HTTP listeners over one [`Stack`].

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use axum::Router;
use citylab_resource::Clock;
use serde::Serialize;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::task::JoinHandle;

use crate::config::Config;
use crate::stack::Stack;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Addrs {
    pub monitor: SocketAddr,
    pub lake: SocketAddr,
    pub exchange: SocketAddr,
    pub quality: SocketAddr,
}

pub struct Running {
    pub stack: Arc<Stack>,
    pub addrs: Addrs,
    stop: watch::Sender<bool>,
    tasks: Vec<JoinHandle<std::io::Result<()>>>,
}

async fn bind(name: &str, addr: SocketAddr) -> anyhow::Result<TcpListener> {
    TcpListener::bind(addr)
        .await
        .with_context(|| format!("{name} cannot listen on {addr}"))
}

fn spawn(listener: TcpListener, router: Router, mut stop: watch::Receiver<bool>) -> JoinHandle<std::io::Result<()>> {
    tokio::spawn(async move {
        axum::serve(listener, router.into_make_service_with_connect_info::<SocketAddr>())
            .with_graceful_shutdown(async move {
                let _ = stop.wait_for(|s| *s).await;
            })
            .await
    })
}

/// Binds every listener before opening any store, so a taken port fails
/// fast and leaves the data directory alone.
pub async fn start(cfg: &Config, clock: Arc<dyn Clock>) -> anyhow::Result<Running> {
    cfg.check()?;
    cfg.signing_secret()?;
    let monitor = bind("monitor", cfg.monitor_addr).await?;
    let lake = bind("lake intake", cfg.lake_addr).await?;
    let exchange = bind("exchange", cfg.exchange_addr).await?;
    let quality = bind("quality", cfg.quality_addr).await?;
    let addrs = Addrs {
        monitor: monitor.local_addr()?,
        lake: lake.local_addr()?,
        exchange: exchange.local_addr()?,
        quality: quality.local_addr()?,
    };
    let stack = Arc::new(Stack::open(cfg, clock)?);
    stack.save_state()?;
    let (tx, rx) = watch::channel(false);
    let tasks = vec![
        spawn(monitor, citylab_monitor::router(stack.monitor.clone()), rx.clone()),
        spawn(lake, citylab_lake::http::router(stack.lake.clone()), rx.clone()),
        spawn(exchange, citylab_exchange::router(stack.exchange.clone(), cfg.gzip), rx.clone()),
        spawn(quality, citylab_quality::router(stack.pipeline.clone()), rx),
    ];
    tracing::info!(?addrs, "serving");
    Ok(Running {
        stack,
        addrs,
        stop: tx,
        tasks,
    })
}

impl Running {
    pub fn with_urls(&self, cfg: &Config) -> Config {
        Config {
            monitor_addr: self.addrs.monitor,
            lake_addr: self.addrs.lake,
            exchange_addr: self.addrs.exchange,
            quality_addr: self.addrs.quality,
            ..cfg.clone()
        }
    }

    /// Stops accepting requests, drains deliveries and flushes the stores.
    pub async fn stop(self) -> anyhow::Result<()> {
        let _ = self.stop.send(true);
        for t in self.tasks {
            match t.await {
                Ok(Ok(())) => {}
                Ok(Err(e)) => tracing::warn!("listener ended with {e}"),
                Err(e) => tracing::warn!("listener task failed: {e}"),
            }
        }
        self.stack.shutdown(Duration::from_secs(30)).await
    }
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
