from runs.management.base import CampaignCommand


class Command(CampaignCommand):
    help = "Spin-resolved ground levels E(S) and the ferromagnetic ordering of energy levels."
    subcommand = "foel"
    sections = ("model",)
