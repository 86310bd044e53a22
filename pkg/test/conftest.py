def pytest_addoption(parser):
    parser.addoption(
        "--socket_timeout",
        action="store",
        type=float,
        default=60.0,
        help="Seconds a socket mode test waits for its cloud node.",
    )


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "socket: test spawns a cloud node process on loopback"
    )
