"""
Logging configuration for the application.

This module sets up logging for the command-line tool, writing logs to a file in the
`.log/` directory at the root of the project. The log file is named `app.log`, and the
log level can be configured through the environment variable `LOG_LEVEL` (defaulting to
`INFO` if not set) or per invocation with the CLI's `--log-level` option. The log file
location can be customized using `LOG_PATH`.

Training curves are not written here: the trainer keeps its own line-oriented log next
to the checkpoint.

Pillow logs every decoder plugin it probes at DEBUG level, so its logger is capped at
WARNING to keep debug runs readable.

Log file location:
    By default, the log file is stored at:
    <project_root>/.log/app.log

Modules:
    logging
    os
"""

import logging
import os

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

project_root = os.path.abspath(os.path.join(
    os.path.dirname(__file__), "..", ".."))
default_log_dir = os.path.join(project_root, ".log")
default_log_file = os.path.join(default_log_dir, "app.log")
log_file_path = os.getenv("LOG_PATH", default_log_file)
log_level = os.getenv("LOG_LEVEL", "INFO").upper()


def configure(level=None, path=None):
    """
    Installs the file handler on the root logger, replacing any previous handler.

    Args:
        level (str, optional): Level name such as "DEBUG"; defaults to `LOG_LEVEL`.
        path (str, optional): Log file path; defaults to `LOG_PATH` or `.log/app.log`.
    """
    path = path or log_file_path
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, (level or log_level).upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=[
            logging.FileHandler(path)
        ],
        force=True
    )
    logging.getLogger("PIL").setLevel(logging.WARNING)


configure()
