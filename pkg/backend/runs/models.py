from django.db import models
from django.utils import timezone

SUBCOMMAND_CHOICES = [(s, s) for s in (
    "spectrum", "foel", "liebmattis", "ssep", "droplet", "lightcone", "cluster", "perturb",
)]


class RunRecord(models.Model):
    created_at = models.DateTimeField(default=timezone.now, db_index=True)
    subcommand = models.CharField(max_length=32, choices=SUBCOMMAND_CHOICES)
    config = models.JSONField(default=dict, blank=True)  # section -> key -> value
    versions = models.JSONField(default=dict, blank=True)
    wall_time = models.FloatField(default=0.0)
    exit_code = models.IntegerField(null=True, blank=True)
    output_path = models.CharField(max_length=512, blank=True)
    manifest_path = models.CharField(max_length=512, blank=True)
    error = models.TextField(blank=True)

    class Meta:
        ordering = ["-created_at"]
        indexes = [models.Index(fields=["subcommand", "created_at"], name="runs_runrec_subcomm_5d2c1e_idx")]

    def __str__(self):
        return f"{self.created_at:%Y-%m-%d %H:%M} {self.subcommand} exit={self.exit_code}"

    @property
    def passed(self) -> bool:
        return self.exit_code == 0

    def manifest(self) -> dict:
        """The JSON manifest, rebuilt from the stored rows."""
        return {
            "subcommand": self.subcommand,
            "config": self.config,
            "versions": self.versions,
            "wall_time": self.wall_time,
            "exit_code": self.exit_code,
            "outputs": [p for p in (self.output_path,) if p],
            "assertions": [a.as_dict() for a in self.assertions.order_by("id")],
        }


class AssertionRecord(models.Model):
    run = models.ForeignKey(RunRecord, on_delete=models.CASCADE, related_name="assertions")
    name = models.CharField(max_length=128)
    passed = models.BooleanField()
    detail = models.JSONField(default=dict, blank=True)

    class Meta:
        indexes = [models.Index(fields=["name", "passed"], name="runs_assert_name_8a41b7_idx")]

    def __str__(self):
        return f"{self.name}: {'pass' if self.passed else 'FAIL'}"

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}
