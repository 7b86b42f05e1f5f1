from runs.management.base import CampaignCommand


class Command(CampaignCommand):
    help = "Exclusion-process gaps for every particle number and the XXX conjugacy."
    subcommand = "ssep"
    sections = ("model",)
