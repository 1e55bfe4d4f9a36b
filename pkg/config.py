"""
Configuration settings for the SIT-LMPC experiment harness.

Process-level settings only; per-experiment settings live in the TOML files
under configs/ and are parsed by utils.experiment_config.
"""
import os
from dotenv import load_dotenv

load_dotenv()

class Config:
    """Base configuration."""
    # Where `sitlmpc run` writes artifacts and where the results service reads them
    OUTPUT_DIR = os.environ.get('SITLMPC_OUTPUT_DIR', 'runs')
    
    # Logging
    LOG_LEVEL = os.environ.get('SITLMPC_LOG_LEVEL', 'INFO')
    
    # Seeds run in separate processes; 1 keeps everything in-process
    WORKERS = int(os.environ.get('SITLMPC_WORKERS', '1'))
    
    # Shipped experiment configs
    CONFIG_DIR = os.environ.get(
        'SITLMPC_CONFIG_DIR',
        os.path.join(os.path.dirname(os.path.abspath(__file__)), 'configs')
    )
    
    # Results service
    SECRET_KEY = os.environ.get('SECRET_KEY') or 'dev-secret-key-change-in-production'
    MAX_METRIC_ROWS = 100000
