from runs.management.base import CampaignCommand


class Command(CampaignCommand):
    help = "Ground-state correlations against the exponential clustering bound."
    subcommand = "cluster"
    sections = ("model", "dynamics")
