from runs.management.base import CampaignCommand


class Command(CampaignCommand):
    help = "Commutator growth on an (x, t) grid against the Lieb-Robinson bound."
    subcommand = "lightcone"
    sections = ("model", "dynamics")
