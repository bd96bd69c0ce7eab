from configparser import ConfigParser, Error as ConfigParserError

from . import constants
from .bcd import BcdSettings
from .errors import ConfigError
from .model import Scenario

SCENARIO_SECTION = 'scenario'
SOLVER_SECTION = 'solver'


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


# linear key -> (alternative key, converter to the linear SI value)
ALTERNATIVE_KEYS = {
    'gain_ref': ('gain_ref_db', db_to_linear),
    'snr_gap': ('snr_gap_db', db_to_linear),
    'noise_w': ('noise_dbm', dbm_to_watts),
    'packet_size_bits': ('packet_size_mbits', lambda v: v * 1e6),
    'bandwidth_hz': ('bandwidth_mhz', lambda v: v * 1e6),
}


def default_scenario():
    """the reference scenario: 10 packets of 1 Mbit over a 1.6 km relay at 100 m."""
    return Scenario(
        n_packets=constants.N_PACKETS,
        packet_size_bits=constants.PACKET_SIZE_BITS,
        bandwidth_hz=constants.BANDWIDTH_HZ,
        source_pos=constants.SOURCE_POS,
        dest_pos=constants.DEST_POS,
        uav_start=constants.UAV_START,
        uav_end=constants.UAV_END,
        altitude_m=constants.ALTITUDE_M,
        v_max=constants.V_MAX,
        e_source_j=constants.E_SOURCE_J,
        e_uav_j=constants.E_UAV_J,
        gain_ref=db_to_linear(constants.GAIN_REF_DB),
        snr_gap=db_to_linear(constants.SNR_GAP_DB),
        noise_w=dbm_to_watts(constants.NOISE_DBM),
    )


class ConfigManager:
    """
    provides methods to load, save, and access scenario values stored in an
    INI file. uses ConfigParser to handle the file I/O and data storage.

    the file has a [scenario] section keyed by Scenario field names and an
    optional [solver] section with the outer-loop settings.

    attributes:
        path (str | None): file the config was read from.
        config (ConfigParser): the ConfigParser object used to manage the configuration.
    """
    def __init__(self, path=None):
        """
        init the ConfigManager.

        args:
            path (str | None): INI file to read. None starts from an empty config,
                               so every value falls back to its default.
        """
        self.path = path
        self.config = ConfigParser()
        self.load_config()

    def load_config(self):
        """
        load the config from self.path.

        a missing [scenario] section is added in memory so lookups fall back to defaults.

        raises:
            ConfigError: the file can't be read or isn't valid INI.
        """
        if self.path is not None:
            try:
                with open(self.path) as f:
                    self.config.read_file(f)
            except (OSError, ConfigParserError) as e:
                raise ConfigError(f"cannot read config {self.path}: {e}") from e

        if not self.config.has_section(SCENARIO_SECTION):
            self.config.add_section(SCENARIO_SECTION)

    def save_config(self, path=None):
        """
        save current config to path (self.path by default), overwriting any existing content.
        """
        path = path or self.path
        if path is None:
            raise ConfigError("no path to save the config to")
        with open(path, 'w') as configfile:
            self.config.write(configfile)

    def get_value(self, key, default_value, section=SCENARIO_SECTION):
        """
        retrieve a value from the config.

        this method returns the value associated with given key. if key
        doesn't exist, it returns the default value. method automatically
        converts return value to appropriate type based on default value.

        args:
            key (str): key of the config item to retrieve.
            default_value (Any): default value to return if key doesn't exist.
            section (str): INI section to look in.

        returns:
            value associated with the key, or default value if key doesn't exist.
            return type matches type of default_value; tuples are read as "x, y" points.

        raises:
            ConfigError: the stored text can't be converted.
        """
        try:
            if isinstance(default_value, bool):
                return self.config.getboolean(section, key, fallback=default_value)
            elif isinstance(default_value, int):
                return self.config.getint(section, key, fallback=default_value)
            elif isinstance(default_value, float):
                return self.config.getfloat(section, key, fallback=default_value)
            elif isinstance(default_value, tuple):
                raw = self.config.get(section, key, fallback=None)
                return default_value if raw is None else parse_point(raw, key)
            else:
                return self.config.get(section, key, fallback=default_value)
        except ValueError as e:
            raise ConfigError(f"bad value for {section}.{key}: {e}") from e

    def set_value(self, key, value, section=SCENARIO_SECTION):
        """
        set a value in the config. points are stored as "x, y", everything else via repr/str.
        """
        if not self.config.has_section(section):
            self.config.add_section(section)
        if isinstance(value, tuple):
            text = ', '.join(repr(float(v)) for v in value)
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        self.config.set(section, key, text)

    def has_value(self, key, section=SCENARIO_SECTION):
        return self.config.has_option(section, key)

    def load_scenario(self):
        """
        build a Scenario from the [scenario] section, filling gaps with the reference defaults.

        raises:
            ConfigError: unknown keys, a linear key given together with its
                         dB/mega twin, or unparsable values.
            InvalidScenarioError: the values violate a Scenario invariant.
        """
        defaults = default_scenario()
        known = set(Scenario.__dataclass_fields__) | {alt for alt, _ in ALTERNATIVE_KEYS.values()}
        unknown = set(self.config.options(SCENARIO_SECTION)) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {', '.join(sorted(unknown))}")

        values = {}
        for name in Scenario.__dataclass_fields__:
            default = getattr(defaults, name)
            alt = ALTERNATIVE_KEYS.get(name)
            if alt is not None and self.has_value(alt[0]):
                if self.has_value(name):
                    raise ConfigError(f"give either {name} or {alt[0]}, not both")
                values[name] = alt[1](self.get_value(alt[0], 0.0))
            else:
                values[name] = self.get_value(name, default)
        return Scenario(**values)

    def load_settings(self):
        """BcdSettings from the optional [solver] section."""
        base = BcdSettings()
        if not self.config.has_section(SOLVER_SECTION):
            return base
        return BcdSettings(
            eps=self.get_value('eps', base.eps, SOLVER_SECTION),
            max_outer=self.get_value('max_outer', base.max_outer, SOLVER_SECTION),
            eps_sca=self.get_value('eps_sca', base.eps_sca, SOLVER_SECTION),
            max_sca=self.get_value('max_sca', base.max_sca, SOLVER_SECTION),
        )

    def save_scenario(self, scn, path=None):
        """write scn into the [scenario] section with linear SI keys and save it."""
        self.config.remove_section(SCENARIO_SECTION)
        self.config.add_section(SCENARIO_SECTION)
        for name in Scenario.__dataclass_fields__:
            self.set_value(name, getattr(scn, name))
        self.save_config(path)


def parse_point(text, key='point'):
    parts = [p.strip() for p in text.split(',')]
    if len(parts) != 2:
        raise ConfigError(f"{key} must be written as 'x, y', got {text!r}")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError as e:
        raise ConfigError(f"{key} must be written as 'x, y', got {text!r}") from e
