from typing import Sequence

from django.core.management.base import BaseCommand, CommandError

from runs.campaigns import exit_code_for, run_campaign
from runs.config import build_config, flag_keys, option
from spinlab.errors import SpinlabError

COMMON_FLAGS = ("out", "format", "threads", "tol", "dense_cutoff", "lanczos_tol", "degeneracy_tol")


class CampaignCommand(BaseCommand):
    """One campaign per command; flags override the --config file, which overrides defaults."""

    subcommand: str = ""
    sections: Sequence[str] = ("model",)

    def add_arguments(self, parser):
        parser.add_argument("--config", dest="config", default=None, help="sectioned key = value run file")
        parser.add_argument("--no-record", dest="no_record", action="store_true", help="skip the RunRecord row")
        for key in COMMON_FLAGS + flag_keys(self.sections):
            opt = option(key)
            parser.add_argument(f"--{key}", dest=key, type=str, default=None,
                                choices=opt.choices, help=opt.help or None)

    def overrides(self, opts) -> dict:
        keys = COMMON_FLAGS + flag_keys(self.sections)
        out = {k: opts.get(k) for k in keys}
        if opts.get("no_record"):
            out["record"] = False
        return out

    def handle(self, *args, **opts):
        try:
            cfg = build_config(self.subcommand, opts.get("config"), self.overrides(opts))
            outcome = run_campaign(cfg)
        except SpinlabError as exc:
            raise CommandError(str(exc), returncode=exit_code_for(exc)) from exc
        for check in outcome.checks:
            style = self.style.SUCCESS if check.passed else self.style.ERROR
            self.stdout.write(style(f"{'ok  ' if check.passed else 'FAIL'} {check.name}"))
        if outcome.exit_code:
            names = ", ".join(c.name for c in outcome.failed)
            raise CommandError(f"{self.subcommand}: failed assertions: {names}", returncode=outcome.exit_code)
        self.stdout.write(self.style.SUCCESS(f"{self.subcommand}: wrote {outcome.data_path}"))
