from runs.management.base import CampaignCommand


class Command(CampaignCommand):
    help = "Full spectrum by magnetization sector; checks the sector union against one dense diagonalization."
    subcommand = "spectrum"
    sections = ("model",)
