from typing import Union, Iterable, Dict, Any
import copy
import json


class Config(dict):
    """
    A dictionary whose keys can also be read and written as attributes,
    missing keys read as ``None``.

    Example::

        c = Config(alpha=0.9, t_max=2)
        c.alpha        # 0.9
        c["t_max"]     # 2
        c.seed = 3
    """

    def __getattr__(self, key):
        if key[:2] == key[-2:] == "__":
            raise AttributeError(f"Failed to find attribute: {key}")
        return self.get(key, None)

    def __setattr__(self, key, value):
        self[key] = value

    def __deepcopy__(self, memo):
        return Config(copy.deepcopy(dict(self), memo))

    @property
    def data(self) -> Dict[str, Any]:
        return dict(self)


def parse_value(value: str):
    """
    Parse a command line value, JSON literals (numbers, ``true``, lists,
    quoted strings ...) are decoded, anything else is kept as a string.
    """
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value


def parse_overrides(overrides: Iterable[str]) -> Dict[str, Any]:
    """
    Parse ``key=value`` strings given by ``--conf`` on the command line.

    Example::

        python -m spikesplit.auto run --conf alpha=0.95 --conf split=\\"SP3\\"

    Args:
        overrides: A list of ``key=value`` strings.

    Raises:
        ``ValueError`` if a string contains no ``=``.
    """
    result = {}
    for override in overrides or ():
        if "=" not in override:
            raise ValueError(
                f'Invalid override "{override}", expected format is key=value'
            )
        name, value = override.split("=", 1)
        result[name.strip()] = parse_value(value.strip())
    return result


def load_config_file(json_file: str, merge_conf: Config = None) -> Config:
    """
    Get configs from a json file.

    Args:
        json_file: Path to the json config file.
        merge_conf: Config to merge, keys in the file take precedence.

    Return:
        configuration
    """
    with open(json_file) as config_file:
        config_dict = json.load(config_file)

    return merge_config((Config() if merge_conf is None else merge_conf), config_dict)


def save_config(conf: Union[Config, dict], json_file: str):
    """
    Dump config object to a json file.
    """
    with open(json_file, "w") as config_file:
        json.dump(dict(conf), config_file, sort_keys=True, indent=4)


def merge_config(conf: Union[Config, dict], merge: Union[dict, Config]) -> Config:
    """
    Merge config object with a dictionary, or a Config object,
    same keys in the ``conf`` will be overwritten by keys
    in ``merge``.
    """
    new_conf = Config(copy.deepcopy(dict(conf)))
    for k, v in merge.items():
        new_conf[k] = copy.deepcopy(v)
    return new_conf
