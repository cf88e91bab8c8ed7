import click

from commands import lg_test
from commands import macroscopicity
from commands import oracle_check
from commands import posterior
from commands import prior
from commands import simulate


def register_commands(cli: click.Group):
    prior.register(cli)
    posterior.register(cli)
    macroscopicity.register(cli)
    simulate.register(cli)
    oracle_check.register(cli)
    lg_test.register(cli)
