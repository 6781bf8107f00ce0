from ipsim.runners.main_runner import MainRunner, SUBCOMMANDS
