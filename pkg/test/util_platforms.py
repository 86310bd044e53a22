import socket
import sys
import pytest

linux_only = pytest.mark.skipif("not sys.platform.startswith('linux')")


def loopback_available() -> bool:
    try:
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
            sock.bind(("127.0.0.1", 0))
        return True
    except OSError:
        return False


requires_loopback = pytest.mark.skipif(
    not loopback_available(), reason="Requires a bindable loopback interface"
)


def linux_only_forall():
    if not sys.platform.startswith("linux"):
        pytest.skip("Requires Linux platform", allow_module_level=True)
