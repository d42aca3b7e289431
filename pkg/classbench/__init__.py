from pkg_resources import DistributionNotFound, get_distribution

try:
    __version__ = get_distribution(__name__.split('.', 1)[0]).version
except DistributionNotFound:
    # running from a checkout that was never installed
    __version__ = '0.0.0'
